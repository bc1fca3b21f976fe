"""Brute-force references for toy graphs.

Nothing here uses the Fix-Routes engine. Stable states come from explicit
best-response dynamics (:mod:`sbgpsim.dynamics`), tiebreak bounds from
enumerating every tiebreak completion, and partition labels from
enumerating every deployment.
"""

from __future__ import annotations

import itertools
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .dynamics import Dynamics, seeded_order
from .policy import PolicyModel, SecurityRank
from .routing_engine import LeadsTo, Scenario
from .topology import AsGraph

MAX_BR_NODES = 16
MAX_ENUM_NODES = 12
MAX_KSEC_NODES = 14
MAX_COMPLETIONS = 1 << 16


class OracleLimitError(ValueError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, state):
        super().__init__("best-response dynamics did not reach a fixed point")
        self.state = state


@dataclass(frozen=True)
class StableState:
    """Explicit route (or None) and tie set of next hops for every AS."""

    paths: tuple
    ties: tuple

    @property
    def key(self) -> int:
        return hash(self.paths)

    def next_hop(self, v: int) -> int | None:
        p = self.paths[v]
        return p[1] if p is not None and len(p) > 1 else None

    def leads_to(self, d: int, m: int | None) -> list[LeadsTo]:
        """Per-AS lead-to class over every tiebreak completion of the tie sets."""
        return tiebreak_leads(self.ties, d, m)


def _check_size(graph: AsGraph, cap: int, what: str) -> None:
    if graph.n > cap:
        raise OracleLimitError(f"{what}: graph has {graph.n} ASes, cap is {cap}")


def best_response_fixed_point(
    graph: AsGraph,
    scenario: Scenario,
    model: PolicyModel | Sequence[PolicyModel],
    activation_seed: int = 0,
    *,
    tiebreak=None,
    size_cap: int = MAX_BR_NODES,
) -> StableState:
    """Stable state reached by asynchronous best response from empty routes.

    Raises:
        NonConvergence: the dynamics cycled or hit the round cap.
    """
    _check_size(graph, size_cap, "best_response_fixed_point")
    dyn = Dynamics(graph, scenario, model, tiebreak=tiebreak)
    paths, converged, _ = dyn.run(seeded_order(graph.n, activation_seed))
    if not converged:
        raise NonConvergence(tuple(paths))
    return _freeze(dyn, paths)


def _freeze(dyn: Dynamics, paths) -> StableState:
    ties = []
    origins = {dyn.d, dyn.m}
    for v in range(dyn.graph.n):
        ties.append(() if v in origins else dyn.best_response(v, paths)[1])
    return StableState(tuple(paths), tuple(ties))


def tiebreak_leads(ties: Sequence[tuple], d: int, m: int | None,
                   max_completions: int = MAX_COMPLETIONS) -> list[LeadsTo]:
    """Lead-to class per AS over all choices of one next hop per tie set.

    Every AS with several tied next hops independently picks one; each
    combination is followed hop by hop. Beyond ``max_completions``
    combinations the result falls back to reachability in the tie graph,
    which gives the same answer when tie sets do not depend on the
    tiebreak.
    """
    n = len(ties)
    multi = [v for v in range(n) if len(ties[v]) > 1]
    total = 1
    for v in multi:
        total *= len(ties[v])
    out = bytearray(n)
    out[d] = 1
    if m is not None:
        out[m] = 2
    if total > max_completions:
        return _reach_leads(ties, d, m)
    choice = [t[0] if t else None for t in ties]
    for combo in itertools.product(*(ties[v] for v in multi)):
        for v, u in zip(multi, combo):
            choice[v] = u
        for s in range(n):
            if s == d or s == m:
                continue
            v, steps = s, 0
            while v is not None and v != d and v != m and steps <= n:
                v = choice[v]
                steps += 1
            if v is None:
                continue
            if v == d:
                out[s] |= 1
            elif v == m:
                out[s] |= 2
    return [LeadsTo(x) for x in out]


def _reach_leads(ties, d, m):
    n = len(ties)
    memo: list = [None] * n

    def go(v, stack):
        if v == d:
            return 1
        if v == m:
            return 2
        if memo[v] is not None:
            return memo[v]
        if v in stack:
            return 0
        stack.add(v)
        acc = 0
        for u in ties[v]:
            acc |= go(u, stack)
        stack.discard(v)
        memo[v] = acc
        return acc

    return [LeadsTo(go(v, set())) for v in range(n)]


def happy_counts(leads: Sequence[LeadsTo], d: int, m: int) -> tuple[int, int]:
    """(lower, upper) happy counts over sources, from lead-to classes."""
    lower = sum(1 for v, x in enumerate(leads) if v not in (d, m) and x == LeadsTo.DESTINATION)
    upper = lower + sum(1 for v, x in enumerate(leads) if v not in (d, m) and x == LeadsTo.MIXED)
    return lower, upper


def deployments(graph: AsGraph, m: int, d: int) -> Iterable[frozenset]:
    """Every secure set that can matter: the empty set and all sets with d.

    Sets without d admit no secure route and behave like the empty set;
    the attacker's own security never matters.
    """
    others = [v for v in range(graph.n) if v not in (m, d)]
    yield frozenset()
    for r in range(len(others) + 1):
        for combo in itertools.combinations(others, r):
            yield frozenset(combo) | {d}


def enumerate_deployments(graph: AsGraph, m: int, d: int, model: PolicyModel,
                          *, size_cap: int = MAX_ENUM_NODES) -> dict[int, str]:
    """Exact partition labels by brute force over deployments and tiebreaks.

    Returns ``{source: label}`` with labels ``"immune"``, ``"doomed"``,
    ``"protectable"`` or ``"unreachable"`` (no route in any deployment).
    """
    _check_size(graph, size_cap, "enumerate_deployments")
    if m == d:
        raise ValueError("attacker and destination coincide")
    seen = [0] * graph.n
    for S in deployments(graph, m, d):
        state = best_response_fixed_point(graph, Scenario(d, m, S), model, size_cap=size_cap)
        for v, x in enumerate(state.leads_to(d, m)):
            seen[v] |= int(x)
    labels = {}
    for v in range(graph.n):
        if v in (m, d):
            continue
        labels[v] = {0: "unreachable", 1: "immune", 2: "doomed", 3: "protectable"}[seen[v]]
    return labels


@dataclass(frozen=True)
class KSecurityResult:
    secure_set: frozenset
    happy: int
    evaluated: int


def max_k_security_bruteforce(graph: AsGraph, m: int, d: int, k: int, model: PolicyModel,
                              *, size_cap: int = MAX_KSEC_NODES,
                              candidates: Iterable[int] | None = None) -> KSecurityResult:
    """Secure set of size ``k`` maximizing the lower-bound happy count.

    ``happy`` counts sources (destination and attacker excluded) that reach
    d under every tiebreak. The first maximizer in lexicographic order of
    sorted members is returned.
    """
    _check_size(graph, size_cap, "max_k_security_bruteforce")
    pool = sorted(range(graph.n) if candidates is None else candidates)
    if not 0 <= k <= len(pool):
        raise ValueError(f"k={k} outside 0..{len(pool)}")
    best = None
    count = 0
    for combo in itertools.combinations(pool, k):
        S = frozenset(combo)
        state = best_response_fixed_point(graph, Scenario(d, m, S), model, size_cap=size_cap)
        lower, _ = happy_counts(state.leads_to(d, m), d, m)
        count += 1
        if best is None or lower > best[1]:
            best = (S, lower)
    return KSecurityResult(best[0], best[1], count)


@dataclass(frozen=True)
class SetCoverGadget:
    """Max-k-Security instance built from a set-cover instance.

    Each element and each set becomes an AS. Elements are providers of the
    attacker, sets are providers of the destination, and an element is a
    provider of every set that contains it. With ``k = n + gamma + 1``, a
    deployment making ``n + w + 1`` ASes happy (the destination counted)
    exists iff the instance has a cover of size ``gamma``.
    """

    graph: AsGraph
    m: int
    d: int
    elements: tuple[int, ...]
    sets: tuple[int, ...]
    gamma: int

    @property
    def k(self) -> int:
        return len(self.elements) + self.gamma + 1

    @property
    def target(self) -> int:
        return len(self.elements) + len(self.sets) + 1


def set_cover_gadget(n_elements: int, subsets: Sequence[Iterable[int]], gamma: int) -> SetCoverGadget:
    d_asn, m_asn = 1, 2
    elem = [100 + i for i in range(n_elements)]
    sets = [200 + j for j in range(len(subsets))]
    p2c = []
    for i in range(n_elements):
        p2c.append((elem[i], m_asn))
    for j, members in enumerate(subsets):
        p2c.append((sets[j], d_asn))
        for i in members:
            p2c.append((elem[i], sets[j]))
    g = AsGraph.from_edges(p2c, asns=[d_asn, m_asn, *elem, *sets])
    return SetCoverGadget(
        g, g.index(m_asn), g.index(d_asn),
        tuple(g.index(a) for a in elem), tuple(g.index(a) for a in sets), gamma,
    )


def has_cover(n_elements: int, subsets: Sequence[Iterable[int]], gamma: int) -> bool:
    universe = set(range(n_elements))
    for combo in itertools.combinations(range(len(subsets)), gamma):
        if set().union(*(set(subsets[j]) for j in combo)) >= universe:
            return True
    return False


def random_set_cover(rng: random.Random, max_n: int = 5, max_w: int = 5):
    """Random set-cover instance where every element lies in some set."""
    n = rng.randint(1, max_n)
    w = rng.randint(1, max_w)
    subsets = [sorted(i for i in range(n) if rng.random() < 0.4) for _ in range(w)]
    for i in range(n):
        if not any(i in s for s in subsets):
            subsets[rng.randrange(w)].append(i)
    subsets = [sorted(set(s)) for s in subsets]
    gamma = rng.randint(1, w)
    return n, subsets, gamma


def wedgie_probe(graph: AsGraph, scenario: Scenario, per_as_model, seeds: Iterable[int] = range(200),
                 link_events: Sequence[tuple[int, int]] = ()) -> list[tuple]:
    """Distinct stable states reachable under mixed per-AS models.

    Each seed gives one activation order; every converged run contributes
    its fixed point. For each link in ``link_events`` the probe also starts
    from every state found so far, fails the link, lets routing settle,
    restores the link and settles again.
    """
    dyn = Dynamics(graph, scenario, per_as_model)
    found: dict = {}
    for seed in seeds:
        paths, ok, _ = dyn.run(seeded_order(graph.n, seed))
        if ok:
            found.setdefault(tuple(paths), None)
    for a, b in link_events:
        cut = graph.without_edge(a, b)
        dyn_cut = Dynamics(cut, scenario, per_as_model)
        for state in list(found):
            order = list(range(graph.n))
            paths, ok, _ = dyn_cut.run(order, initial=state)
            if not ok:
                continue
            paths, ok, _ = dyn.run(order, initial=paths)
            if ok:
                found.setdefault(tuple(paths), None)
    return list(found)


def replay_link_failure(graph: AsGraph, scenario: Scenario, per_as_model, start, link, order=None):
    """States before failure, during failure, and after restoring ``link``."""
    order = list(range(graph.n)) if order is None else order
    dyn = Dynamics(graph, scenario, per_as_model)
    cut = Dynamics(graph.without_edge(*link), scenario, per_as_model)
    during, ok1, _ = cut.run(order, initial=start)
    after, ok2, _ = dyn.run(order, initial=during)
    if not (ok1 and ok2):
        raise NonConvergence(tuple(after))
    return tuple(start), tuple(during), tuple(after)


def homogeneous(model: PolicyModel, n: int) -> list[PolicyModel]:
    return [model] * n


MODELS_3 = (PolicyModel(SecurityRank.FIRST), PolicyModel(SecurityRank.SECOND),
            PolicyModel(SecurityRank.THIRD))
