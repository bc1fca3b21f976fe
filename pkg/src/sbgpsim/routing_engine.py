"""Stable routing outcomes under partial S*BGP deployment.

:func:`compute_outcome` is a single-pass variant of the staged Fix-Routes
BFS. Every candidate route gets an integer rank key (see
:class:`~sbgpsim.policy.KeyEncoder`) whose order reproduces the stage
schedule of the model: under SecuritySecond, for instance, all secure
customer routes sort before insecure customer routes, which sort before
peer routes. Extending a route by one hop always yields a strictly larger
key, so popping ASes from a heap in key order fixes each AS exactly when
the staged algorithm would, and the same loop also handles LP(k).
"""

from __future__ import annotations

import heapq
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import IntEnum

from .policy import (
    CUSTOMER, PEER, PROVIDER, KeyEncoder, PolicyModel, SecurityRank, stage_name, stage_schedule,
)
from .topology import AsGraph, Relationship

__all__ = [
    "LeadsTo", "Scenario", "RouteSummary", "RoutingOutcome", "ScenarioError",
    "compute_outcome", "compute_outcome_mixed", "stage_schedule",
]


class ScenarioError(ValueError):
    pass


class LeadsTo(IntEnum):
    """Where the routes in a tie set lead; values are bitmasks."""

    UNREACHABLE = 0
    DESTINATION = 1
    ATTACKER = 2
    MIXED = 3


@dataclass(frozen=True)
class Scenario:
    """One experiment: destination, optional attacker, secure and simplex sets."""

    destination: int
    attacker: int | None = None
    secure_set: frozenset = frozenset()
    simplex_stubs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "secure_set", frozenset(self.secure_set))
        object.__setattr__(self, "simplex_stubs", frozenset(self.simplex_stubs))

    def validate(self, graph: AsGraph) -> None:
        n = graph.n
        if not 0 <= self.destination < n:
            raise ScenarioError(f"destination {self.destination} not in graph")
        if self.attacker is not None:
            if not 0 <= self.attacker < n:
                raise ScenarioError(f"attacker {self.attacker} not in graph")
            if self.attacker == self.destination:
                raise ScenarioError("attacker and destination coincide")
        for v in self.secure_set | self.simplex_stubs:
            if not 0 <= v < n:
                raise ScenarioError(f"AS {v} not in graph")
        if self.secure_set & self.simplex_stubs:
            raise ScenarioError("simplex stubs overlap the secure set")
        for v in self.simplex_stubs:
            if graph.customers[v]:
                raise ScenarioError(f"simplex AS {graph.asns[v]} is not a stub")

    def without_attacker(self) -> Scenario:
        return Scenario(self.destination, None, self.secure_set, self.simplex_stubs)

    def insecure(self) -> Scenario:
        return Scenario(self.destination, self.attacker)


@dataclass(frozen=True)
class RouteSummary:
    next_hops: frozenset
    rel_type: Relationship | None
    length: int
    secure: bool
    leads_to: LeadsTo
    canonical_next_hop: int | None
    fixed_stage: str | None


class RoutingOutcome:
    """Per-AS route summaries, stored column-wise.

    ``length[v]`` is -1 and ``rel_type[v]`` is -1 for unreachable ASes and
    for the two origins (destination and attacker). ``order`` lists ASes in
    the order their routes were fixed.
    """

    __slots__ = ("graph", "scenario", "model", "length", "rel_type", "secure", "leads",
                 "next_hops", "stage", "order")

    def __init__(self, graph, scenario, model, length, rel_type, secure, leads, next_hops,
                 stage, order):
        self.graph = graph
        self.scenario = scenario
        self.model = model
        self.length = length
        self.rel_type = rel_type
        self.secure = secure
        self.leads = leads
        self.next_hops = next_hops
        self.stage = stage
        self.order = order

    def __getitem__(self, v: int) -> RouteSummary:
        return self.summary(v)

    def summary(self, v: int) -> RouteSummary:
        hops = self.next_hops[v]
        rel = self.rel_type[v]
        return RouteSummary(
            next_hops=frozenset(hops),
            rel_type=Relationship(rel) if rel >= 0 else None,
            length=self.length[v],
            secure=bool(self.secure[v]),
            leads_to=LeadsTo(self.leads[v]),
            canonical_next_hop=hops[0] if hops else None,
            fixed_stage=self.stage[v],
        )

    def sources(self) -> list[int]:
        """All ASes except destination and attacker."""
        skip = {self.scenario.destination, self.scenario.attacker}
        return [v for v in range(self.graph.n) if v not in skip]

    def canonical_route(self, v: int) -> list[int] | None:
        """Route of ``v`` under lowest-id tiebreak, ending at the origin AS.

        For attacked routes the list ends at the attacker; the phantom edge
        to the destination is not included.
        """
        if not self.leads[v]:
            return None
        path = [v]
        while self.next_hops[v]:
            v = self.next_hops[v][0]
            path.append(v)
        return path

    def contains(self, x: int) -> bytearray:
        """Per AS: bit 1 if some tie route avoids ``x``, bit 2 if some contains it."""
        out = bytearray(self.graph.n)
        d, m = self.scenario.destination, self.scenario.attacker
        for r in (d, m):
            if r is not None:
                out[r] = 2 if r == x else 1
        for v in self.order:
            if v == d or v == m:
                continue
            acc = 0
            for u in self.next_hops[v]:
                acc |= out[u]
            out[v] = 2 if v == x else acc
        return out

    def counts(self) -> tuple[int, int, int]:
        """(destination, attacker, mixed) counts over sources."""
        c = [0, 0, 0, 0]
        leads = self.leads
        for v in self.sources():
            c[leads[v]] += 1
        return c[1], c[2], c[3]


def compute_outcome(graph: AsGraph, scenario: Scenario, model: PolicyModel = PolicyModel(),
                    *, check: bool = True) -> RoutingOutcome:
    """Unique stable routing outcome for ``scenario`` under ``model``.

    The destination and the attacker export to every neighbor; the attacker
    claims a direct link to the destination, so its route has length 1 and
    is never secure. A route is secure only if the selecting AS and every AS
    on it are in the secure set and the destination is secure or a simplex
    stub. Simplex stubs select routes as insecure ASes.
    """
    if check:
        scenario.validate(graph)
    n = graph.n
    d = scenario.destination
    m = scenario.attacker
    customers, peers, providers = graph.customers, graph.peers, graph.providers

    sel = bytearray(n)
    d_secure = False
    if model.uses_security:
        for v in scenario.secure_set:
            sel[v] = 1
        d_secure = bool(sel[d]) or d in scenario.simplex_stubs

    enc = KeyEncoder(model, n)
    encode = enc.encode
    length = [-1] * n
    rel_type = [-1] * n
    secure = bytearray(n)
    leads = bytearray(n)
    next_hops: list[tuple] = [()] * n
    stage: list = [None] * n
    fixed = bytearray(n)
    export_all = bytearray(n)
    order = []

    fixed[d] = 1
    export_all[d] = 1
    length[d] = 0
    leads[d] = 1
    secure[d] = d_secure
    order.append(d)
    roots = [(d, 0)]
    if m is not None:
        fixed[m] = 1
        export_all[m] = 1
        length[m] = 1
        leads[m] = 2
        order.append(m)
        roots.append((m, 1))

    heap: list[int] = []
    push = heapq.heappush
    pop = heapq.heappop

    def announce(v, vlen, vsec, to_all):
        nl = vlen + 1
        if to_all:
            for w in providers[v]:
                if not fixed[w]:
                    push(heap, encode(CUSTOMER, nl, vsec and sel[w]) * n + w)
            for w in peers[v]:
                if not fixed[w]:
                    push(heap, encode(PEER, nl, vsec and sel[w]) * n + w)
        for w in customers[v]:
            if not fixed[w]:
                push(heap, encode(PROVIDER, nl, vsec and sel[w]) * n + w)

    for r, rlen in roots:
        announce(r, rlen, secure[r], True)

    while heap:
        key, w = divmod(pop(heap), n)
        if fixed[w]:
            continue
        sw = sel[w]
        best = None
        hops = []
        for rel, nbrs in ((CUSTOMER, customers[w]), (PEER, peers[w]), (PROVIDER, providers[w])):
            for u in nbrs:
                if not fixed[u] or not (export_all[u] or rel == PROVIDER):
                    continue
                k = encode(rel, length[u] + 1, secure[u] and sw)
                if best is None or k < best:
                    best = k
                    hops = [u]
                    brel = rel
                elif k == best:
                    hops.append(u)
        if best != key:
            raise AssertionError(f"heap key mismatch at AS {w}: {key} vs {best}")
        hops.sort()
        u0 = hops[0]
        wlen = length[u0] + 1
        wsec = 1 if (secure[u0] and sw) else 0
        acc = 0
        for u in hops:
            acc |= leads[u]
        fixed[w] = 1
        length[w] = wlen
        rel_type[w] = brel
        secure[w] = wsec
        leads[w] = acc
        next_hops[w] = tuple(hops)
        stage[w] = stage_name(model, brel, wsec)
        order.append(w)
        to_all = brel == CUSTOMER
        export_all[w] = to_all
        announce(w, wlen, wsec, to_all)

    return RoutingOutcome(graph, scenario, model, length, rel_type, secure, leads, next_hops,
                          stage, order)


@dataclass
class MixedResult:
    """Outcome of best-response dynamics with per-AS models.

    ``paths[v]`` is the explicit route of ``v`` (starting at ``v``), or None.
    When ``converged`` is False, ``paths`` is the first repeated state.
    """

    paths: tuple
    converged: bool
    rounds: int


def compute_outcome_mixed(
    graph: AsGraph,
    scenario: Scenario,
    per_as_model: Mapping[int, PolicyModel] | Sequence[PolicyModel],
    activation_order: Iterable[int] | int = 0,
    *,
    initial: Sequence | None = None,
    max_rounds: int | None = None,
) -> MixedResult:
    """Asynchronous best response where each AS applies its own model.

    ``activation_order`` is either an explicit permutation of the ASes or a
    seed from which one is drawn; the permutation is repeated every round.
    Runs until no AS changes in a full round or a global state repeats.
    """
    from .dynamics import Dynamics, seeded_order

    scenario.validate(graph)
    if isinstance(activation_order, int):
        order = seeded_order(graph.n, activation_order)
    else:
        order = list(activation_order)
    dyn = Dynamics(graph, scenario, per_as_model)
    paths, converged, rounds = dyn.run(order, initial=initial, max_rounds=max_rounds)
    return MixedResult(tuple(paths), converged, rounds)


SCHEDULES = {r: stage_schedule(PolicyModel(r)) for r in SecurityRank}
