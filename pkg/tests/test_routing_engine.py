import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbgpsim.dynamics import Dynamics
from sbgpsim.fixtures import SECOND, load_fixture
from sbgpsim.oracle import MODELS_3
from sbgpsim.policy import CUSTOMER, PolicyModel, SecurityRank
from sbgpsim.routing_engine import (
    LeadsTo, Scenario, ScenarioError, compute_outcome, compute_outcome_mixed,
)
from sbgpsim.topology import Relationship, parse_relationships

from support import engine_vs_oracle, random_instance

ALL_MODELS = MODELS_3 + (PolicyModel(SecurityRank.INSECURE),
                         PolicyModel(SecurityRank.THIRD, 2), PolicyModel(SecurityRank.SECOND, 1))


def _canonical_paths(out):
    g, sc = out.graph, out.scenario
    paths = []
    for v in range(g.n):
        r = out.canonical_route(v)
        if r is None:
            paths.append(None)
        elif r[-1] == sc.attacker:
            paths.append(tuple(r) + (sc.destination,))
        else:
            paths.append(tuple(r))
    return paths


def test_line_graph():
    g = parse_relationships("10|20|-1\n20|30|-1\n")
    d, a, b = g.index(10), g.index(20), g.index(30)
    out = compute_outcome(g, Scenario(d))
    assert out.canonical_route(a) == [a, d]
    assert out.canonical_route(b) == [b, a, d]
    assert out.summary(b).rel_type is Relationship.PROVIDER
    assert out.summary(b).length == 2


def test_star_converges_in_one_round():
    g = parse_relationships("".join(f"1|{x}|-1\n" for x in range(2, 9)))
    res = compute_outcome_mixed(g, Scenario(g.index(1)), PolicyModel(), activation_order=3)
    # one round of changes, one quiet round confirming the fixed point
    assert res.converged and res.rounds == 2


def test_attacker_route_length_counts_phantom_hop():
    # s reaches d over s-1-9-d and reaches m over s-5-m; the bogus "m, d"
    # makes both provider routes three hops long
    g = parse_relationships("1|9|-1\n9|2|-1\n5|3|-1\n1|4|-1\n5|4|-1\n")
    d, m, s = g.index(2), g.index(3), g.index(4)
    out = compute_outcome(g, Scenario(d, m))
    assert out.summary(s).length == 3
    assert out.summary(s).leads_to is LeadsTo.MIXED
    assert out.summary(g.index(5)).length == 2


def test_downgrade_fixture():
    f = load_fixture("downgrade")
    v = f.idx(21740)
    normal = compute_outcome(f.graph, Scenario(f.d, None, f.S), SECOND)
    assert normal.secure[v] and normal.canonical_route(v) == [v, f.d]
    attack = compute_outcome(f.graph, Scenario(f.d, f.m, f.S), SECOND)
    route = attack.canonical_route(v)
    assert [f.graph.asns[x] for x in route] == [21740, 174, 3491, 666]
    assert attack.summary(v).length == 4 and not attack.secure[v]
    assert attack.summary(v).fixed_stage == "FPeeR"


def test_scenario_validation():
    g = parse_relationships("1|2|-1\n")
    with pytest.raises(ScenarioError):
        compute_outcome(g, Scenario(5))
    with pytest.raises(ScenarioError):
        compute_outcome(g, Scenario(0, 0))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_engine_matches_best_response(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=11)
    for model in ALL_MODELS:
        assert engine_vs_oracle(g, sc, model, seed) == []


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_outcome_is_stable_and_exports_are_legal(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14)
    for model in ALL_MODELS:
        out = compute_outcome(g, sc, model)
        paths = _canonical_paths(out)
        assert Dynamics(g, sc, model).is_stable(paths)
        for p in paths:
            if p is None:
                continue
            for i in range(1, len(p) - 1):
                prev, hop, nxt = p[i - 1], p[i], p[i + 1]
                if hop == sc.attacker:
                    break
                # hop exports to prev only routes from customers, or to customers
                assert (g.relationship(hop, nxt) == CUSTOMER or g.relationship(hop, prev) == CUSTOMER)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_tie_sets_are_homogeneous(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14)
    for model in ALL_MODELS:
        out = compute_outcome(g, sc, model)
        for v in range(g.n):
            s = out.summary(v)
            cares = model.uses_security and v in sc.secure_set and v not in sc.simplex_stubs
            kinds = set()
            for u in s.next_hops:
                su = out.summary(u)
                kinds.add((g.relationship(v, u), su.length + 1, cares and bool(out.secure[u])))
            assert len(kinds) <= 1


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32))
def test_empty_deployment_third_equals_insecure(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14)
    sc = Scenario(sc.destination, sc.attacker)
    a = compute_outcome(g, sc, PolicyModel(SecurityRank.THIRD))
    b = compute_outcome(g, sc, PolicyModel(SecurityRank.INSECURE))
    assert [a.summary(v) for v in range(g.n)] == [b.summary(v) for v in range(g.n)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_large_lpk_is_collapsed_preference(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=12)
    for sec in SecurityRank:
        a = compute_outcome(g, sc, PolicyModel(sec, g.n))
        b = compute_outcome(g, sc, PolicyModel(sec, g.n + 7))
        assert [a.summary(v) for v in range(g.n)] == [b.summary(v) for v in range(g.n)]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_security_first_never_downgrades(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14, attacker=True)
    first = PolicyModel(SecurityRank.FIRST)
    normal = compute_outcome(g, sc.without_attacker(), first)
    attack = compute_outcome(g, sc, first)
    via = normal.contains(sc.attacker)
    for v in range(g.n):
        if v in (sc.attacker, sc.destination):
            continue
        if normal.secure[v] and not via[v] & 2:
            assert attack.secure[v]


def test_mixed_homogeneous_matches_engine():
    rng = random.Random(5)
    for _ in range(30):
        g, sc = random_instance(rng, max_n=10)
        for model in MODELS_3:
            out = compute_outcome(g, sc, model)
            for seed in range(5):
                res = compute_outcome_mixed(g, sc, [model] * g.n, activation_order=seed)
                assert res.converged
                assert list(res.paths) == _canonical_paths(out)


def test_wedgie_fixture_wedgie_states_depend_on_order():
    f = load_fixture("wedgie")
    models = f.per_as_models(SECOND)
    sc = Scenario(f.d, None, f.S)
    states = {compute_outcome_mixed(f.graph, sc, models, activation_order=s).paths for s in range(60)}
    assert len(states) == 2
