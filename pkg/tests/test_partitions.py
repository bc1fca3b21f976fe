import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbgpsim.fixtures import FIRST, SECOND, load_fixture
from sbgpsim.oracle import MODELS_3, enumerate_deployments
from sbgpsim.partitions import (
    DOOMED, IMMUNE, PROTECTABLE, UNREACHABLE, partition, partition_sweep,
)
from sbgpsim.policy import PolicyModel, SecurityRank
from sbgpsim.routing_engine import Scenario, compute_outcome
from sbgpsim.synthetic import internet_like
from sbgpsim.topology import classify_tiers, parse_relationships

from support import random_instance

THIRD = PolicyModel(SecurityRank.THIRD)


def test_downgrade_fixture_tier1_is_doomed():
    f = load_fixture("downgrade")
    rep = partition(f.graph, f.m, f.d, SECOND)
    assert rep.labels[f.idx(174)] == DOOMED
    assert enumerate_deployments(f.graph, f.m, f.d, SECOND)[f.idx(174)] == "doomed"


def test_single_homed_customer_is_immune():
    g = parse_relationships("1|2|-1\n3|1|-1\n3|4|-1\n")
    d, m, s = g.index(1), g.index(4), g.index(2)
    for model in MODELS_3:
        assert partition(g, m, d, model, exact=True).labels[s] == IMMUNE


def test_security_first_default_is_protectable():
    rng = random.Random(3)
    g, sc = random_instance(rng, max_n=12, min_n=6, attacker=True)
    rep = partition(g, sc.attacker, sc.destination, FIRST)
    assert set(rep.labels) <= {None, PROTECTABLE, UNREACHABLE}


def test_errors():
    g = parse_relationships("1|2|-1\n1|3|-1\n")
    with pytest.raises(ValueError):
        partition(g, 0, 0, THIRD)
    with pytest.raises(ValueError):
        partition(g, 1, 0, PolicyModel(SecurityRank.INSECURE))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_labels_match_enumeration(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=9, min_n=3, attacker=True, simplex=False)
    m, d = sc.attacker, sc.destination
    for model in (SECOND, THIRD, PolicyModel(SecurityRank.SECOND, 2)):
        truth = enumerate_deployments(g, m, d, model)
        labels = partition(g, m, d, model).labels
        assert {v: labels[v] for v in truth} == truth
    truth = enumerate_deployments(g, m, d, FIRST)
    labels = partition(g, m, d, FIRST, exact=True).labels
    for v, lab in truth.items():
        if labels[v] in (IMMUNE, DOOMED):
            assert labels[v] == lab


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_happy_bounds_sandwiched_by_partitions(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14, min_n=3, attacker=True)
    m, d = sc.attacker, sc.destination
    for model in (SECOND, THIRD):
        rep = partition(g, m, d, model)
        lower, _, mixed = compute_outcome(g, sc, model).counts()
        assert rep.counts[IMMUNE] <= lower
        assert lower + mixed <= rep.counts[IMMUNE] + rep.counts[PROTECTABLE]
        assert rep.counts[IMMUNE] <= rep.baseline_lower <= rep.baseline_upper


def test_third_immune_equals_baseline_happy():
    rng = random.Random(8)
    for _ in range(50):
        g, sc = random_instance(rng, max_n=14, min_n=3, attacker=True)
        rep = partition(g, sc.attacker, sc.destination, THIRD)
        assert rep.counts[IMMUNE] == rep.baseline_lower


def test_sweep_is_schedule_independent():
    g = internet_like(400, seed=2)
    tiers = classify_tiers(g, (), n_tier2=10, n_tier3=10, n_small_cp=10)
    M = list(range(0, 400, 37))
    D = list(range(5, 400, 41))
    a = partition_sweep(g, M, D, SECOND, group_by="destination_tier", tiers=tiers, jobs=1)
    b = partition_sweep(g, M, D, SECOND, group_by="destination_tier", tiers=tiers, jobs=3)
    assert a.rows() == b.rows()
    total = partition_sweep(g, M, D, SECOND)
    assert total.row("all")["pairs"] == sum(r["pairs"] for r in a.rows())
    for r in a.rows():
        assert abs(r["immune_frac"] + r["protectable_frac"] + r["doomed_frac"] - 1) < 1e-9


def test_sweep_needs_tiers_for_grouping():
    g = internet_like(100, seed=2)
    with pytest.raises(ValueError):
        partition_sweep(g, [1], [2], SECOND, group_by="attacker_tier")
    with pytest.raises(ValueError):
        partition_sweep(g, [1], [2], SECOND, group_by="bogus")


def test_singleton_sweep_equals_partition():
    rng = random.Random(21)
    g, sc = random_instance(rng, max_n=12, min_n=4, attacker=True)
    rep = partition(g, sc.attacker, sc.destination, SECOND)
    row = partition_sweep(g, [sc.attacker], [sc.destination], SECOND).row("all")
    assert row["pairs"] == 1
    assert row["doomed_frac"] == pytest.approx(rep.fraction(DOOMED))
    assert row["immune_frac"] == pytest.approx(rep.fraction(IMMUNE))


def test_source_tier_grouping():
    g = internet_like(400, seed=2)
    tiers = classify_tiers(g, (), n_tier2=10, n_tier3=10, n_small_cp=10)
    rep = partition_sweep(g, [0, 50], [7, 90], THIRD, group_by="source_tier", tiers=tiers)
    groups = {r["group"] for r in rep.rows()}
    assert "Stub" in groups and "Tier1" in groups


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_labels_consistent_with_random_deployments(seed):
    rng = random.Random(seed)
    g, sc = random_instance(rng, max_n=14, min_n=3, attacker=True, simplex=False)
    m, d = sc.attacker, sc.destination
    for model in (SECOND, THIRD):
        labels = partition(g, m, d, model).labels
        for _ in range(5):
            S = frozenset(v for v in range(g.n) if rng.random() < 0.5) | {d}
            out = compute_outcome(g, Scenario(d, m, S), model)
            for v, lab in enumerate(labels):
                if lab == IMMUNE:
                    assert out.leads[v] == 1
                elif lab == DOOMED:
                    assert out.leads[v] == 2
