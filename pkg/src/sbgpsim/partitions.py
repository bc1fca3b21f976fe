"""Doomed / immune / protectable partitions from one insecure computation.

All three labelings start from the routing outcome with no secure ASes.

* SecurityThird: the tie set of every AS keeps its type and length in every
  deployment and can only shrink, so its lead-to class at S = {} decides
  the label.
* SecuritySecond: an AS keeps its local-preference class (the route type
  under standard LP) in every deployment, but may switch between routes of
  that class. Only routes in which every hop uses its own static class can
  ever be chosen. If none of them reach d the source is doomed, and since
  securing the ASes of any such route makes it the chosen one, that test
  is exact. Immunity is decided bottom-up: a source is safe if it cannot
  be offered an attacked route, or if a safe next hop always offers a
  strictly shorter route than any attacked route it can be offered.
* SecurityFirst: everything reachable is protectable. The exact mode marks
  sources without any perceivable legitimate route as doomed and sources
  without any perceivable attacked route as immune.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .policy import CUSTOMER, PEER, PROVIDER, KeyEncoder, PolicyModel, SecurityRank
from .routing_engine import RoutingOutcome, Scenario, compute_outcome
from .topology import AsGraph, TierAssignment

IMMUNE = "immune"
PROTECTABLE = "protectable"
DOOMED = "doomed"
UNREACHABLE = "unreachable"
LABELS = (IMMUNE, PROTECTABLE, DOOMED)


@dataclass
class PartitionReport:
    """Labels for one (m, d) pair plus counts.

    ``labels[v]`` is None for m and d. Fractions are over classified
    sources; unreachable sources are counted separately.
    """

    m: int
    d: int
    model: PolicyModel
    labels: list
    counts: dict
    baseline_lower: int
    baseline_upper: int
    n_sources: int

    @property
    def classified(self) -> int:
        return self.counts[IMMUNE] + self.counts[PROTECTABLE] + self.counts[DOOMED]

    def fraction(self, label: str) -> float:
        c = self.classified
        return self.counts[label] / c if c else 0.0

    def members(self, label: str) -> list[int]:
        return [v for v, x in enumerate(self.labels) if x == label]


def baseline_outcome(graph: AsGraph, m: int, d: int, model: PolicyModel) -> RoutingOutcome:
    """Attack outcome with nobody secure, under the model's LP variant."""
    return compute_outcome(graph, Scenario(d, m), PolicyModel(SecurityRank.INSECURE, model.lpk))


def partition(graph: AsGraph, m: int, d: int, model: PolicyModel, *, exact: bool = False,
              base: RoutingOutcome | None = None) -> PartitionReport:
    """Label every source for the attack by ``m`` on ``d``.

    Args:
        exact: SecurityFirst only; use the perceivable-route rules instead of
            labeling everything protectable.
        base: precomputed :func:`baseline_outcome`, to share across models.
    """
    if m == d:
        raise ValueError("attacker and destination coincide")
    if model.security is SecurityRank.INSECURE:
        raise ValueError("partitions need a security model")
    if base is None:
        base = baseline_outcome(graph, m, d, model)
    n = graph.n
    leads = base.leads
    if model.security is SecurityRank.THIRD:
        mask = leads
    elif model.security is SecurityRank.SECOND:
        mask = consistent_reach(graph, base, model)
    elif exact:
        mask = perceivable_reach(graph, m, d)
    else:
        mask = bytearray(3 if leads[v] else 0 for v in range(n))
    labels: list = [None] * n
    counts = {IMMUNE: 0, PROTECTABLE: 0, DOOMED: 0, UNREACHABLE: 0}
    names = (UNREACHABLE, IMMUNE, DOOMED, PROTECTABLE)
    for v in range(n):
        if v == m or v == d:
            continue
        x = names[mask[v]] if leads[v] else UNREACHABLE
        labels[v] = x
        counts[x] += 1
    lower = upper = 0
    for v in base.sources():
        if leads[v] == 1:
            lower += 1
            upper += 1
        elif leads[v] == 3:
            upper += 1
    return PartitionReport(m, d, model, labels, counts, lower, upper, n - 2)


def consistent_reach(graph: AsGraph, base: RoutingOutcome, model: PolicyModel) -> bytearray:
    """SecuritySecond labels as bitmasks over class-consistent routes.

    Bit 1 means a consistent route reaches d, bit 2 that the source may end
    up attacked. A safe source picks either a secure route or its shortest
    option, and the shortest option is strictly shorter than any attacked
    one, so it is legitimate in every deployment.
    """
    n = graph.n
    d, m = base.scenario.destination, base.scenario.attacker
    enc = KeyEncoder(model, n)
    length, rtype = base.length, base.rel_type
    cls = [enc.lp_index(rtype[v], length[v]) if rtype[v] >= 0 else -1 for v in range(n)]
    succ: list[list[int]] = [[] for _ in range(n)]
    preds: list[list[int]] = [[] for _ in range(n)]
    for w in range(n):
        if cls[w] < 0:
            continue
        for rel, nbrs in ((CUSTOMER, graph.customers[w]), (PEER, graph.peers[w]),
                          (PROVIDER, graph.providers[w])):
            for u in nbrs:
                if u == d or u == m:
                    pass
                elif rtype[u] < 0:
                    continue
                elif rtype[u] != CUSTOMER and rel != PROVIDER:
                    continue
                if enc.lp_index(rel, length[u] + 1) == cls[w]:
                    succ[w].append(u)
                    preds[u].append(w)
    INF = n + 2
    dist = {}
    for root in (d, m):
        dd = [INF] * n
        dd[root] = length[root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in preds[u]:
                if dd[w] == INF:
                    dd[w] = dd[u] + 1
                    queue.append(w)
        dist[root] = dd
    to_d, to_m = dist[d], dist[m]
    # Settle ASes after all their consistent next hops, tracking for each:
    # safe  - always routes legitimately;
    # att   - shortest attacked route it can end up with (attacked routes
    #         never pass a safe AS);
    # glen  - longest route a safe AS can end up with;
    # gsec  - longest secure route it can end up with.
    # ASes on consistent cycles are never settled and keep the plain bounds.
    safe = bytearray(n)
    safe[d] = 1
    att = [INF] * n
    att[m] = length[m]
    glen = [INF] * n
    glen[d] = 0
    gsec = [INF] * n
    gsec[d] = 0
    pending = [len(succ[v]) for v in range(n)]
    queue = deque((d, m))
    settled = bytearray(n)
    while queue:
        u = queue.popleft()
        for w in preds[u]:
            pending[w] -= 1
            if pending[w] == 0:
                _settle(w, d, succ, safe, att, glen, gsec, to_d, INF)
                settled[w] = 1
                queue.append(w)
    out = bytearray(n)
    for v in range(n):
        if cls[v] < 0:
            continue
        if to_d[v] < INF:
            out[v] |= 1
        if settled[v]:
            if not safe[v] and att[v] < INF:
                out[v] |= 2
        elif to_m[v] < INF:
            out[v] |= 2
    return out


def _settle(v, d, succ, safe, att, glen, gsec, to_d, INF):
    hops = succ[v]
    legit = [u for u in hops if to_d[u] < INF]
    if d in hops:
        # whenever a secure route is possible the direct one is secure too
        gsec[v] = 1
    elif legit:
        gsec[v] = max(gsec[u] + 1 for u in legit)
    best_att = INF
    for u in hops:
        if not safe[u] and att[u] < INF:
            best_att = min(best_att, att[u] + 1)
    shortest_safe = min((glen[u] + 1 for u in hops if safe[u]), default=INF)
    if legit and (best_att == INF or shortest_safe < best_att):
        safe[v] = 1
        glen[v] = max(gsec[v], shortest_safe)
    else:
        att[v] = best_att


def perceivable_reach(graph: AsGraph, m: int, d: int) -> bytearray:
    """Per AS: bit 1 if some perceivable route leads to d, bit 2 if to m.

    A walk from the origin climbs through providers, crosses at most one
    peer link, then descends through customers; any such walk can be
    shortened into a simple export-legal route, so reachability over
    (AS, phase) states is enough.
    """
    n = graph.n
    out = bytearray(n)
    for root, other, bit in ((d, m, 1), (m, d, 2)):
        up = bytearray(n)
        down = bytearray(n)
        up[root] = 1
        queue = deque([(root, 0)])
        while queue:
            x, phase = queue.popleft()
            if x == other:
                continue
            if phase == 0:
                for y in graph.providers[x]:
                    if not up[y]:
                        up[y] = 1
                        queue.append((y, 0))
                for y in graph.peers[x]:
                    if not down[y]:
                        down[y] = 1
                        queue.append((y, 1))
            for y in graph.customers[x]:
                if not down[y]:
                    down[y] = 1
                    queue.append((y, 1))
        for v in range(n):
            if v != root and v != other and (up[v] or down[v]):
                out[v] |= bit
    return out


GROUPINGS = ("none", "destination_tier", "attacker_tier", "source_tier")


@dataclass
class SweepReport:
    """Average per-pair fractions per group.

    Sums are exact fractions, so the result does not depend on the order in
    which pairs are reduced.
    """

    model: PolicyModel
    group_by: str
    pairs: dict = field(default_factory=dict)
    sums: dict = field(default_factory=dict)
    unreachable: dict = field(default_factory=dict)

    def add_fractions(self, group, counts: dict, baseline_lower: int, n_sources: int) -> None:
        classified = counts[IMMUNE] + counts[PROTECTABLE] + counts[DOOMED]
        acc = self.sums.setdefault(group, [Fraction(0)] * 4)
        if classified:
            for i, lab in enumerate(LABELS):
                acc[i] += Fraction(counts[lab], classified)
        if n_sources:
            acc[3] += Fraction(baseline_lower, n_sources)
        self.pairs[group] = self.pairs.get(group, 0) + 1
        self.unreachable[group] = self.unreachable.get(group, 0) + counts[UNREACHABLE]

    def merge(self, other: SweepReport) -> None:
        for g, acc in other.sums.items():
            mine = self.sums.setdefault(g, [Fraction(0)] * 4)
            for i in range(4):
                mine[i] += acc[i]
            self.pairs[g] = self.pairs.get(g, 0) + other.pairs[g]
            self.unreachable[g] = self.unreachable.get(g, 0) + other.unreachable[g]

    def rows(self) -> list[dict]:
        out = []
        for g in sorted(self.sums, key=str):
            k = self.pairs[g]
            acc = self.sums[g]
            out.append({
                "group": g,
                "immune_frac": float(acc[0] / k),
                "protectable_frac": float(acc[1] / k),
                "doomed_frac": float(acc[2] / k),
                "baseline_happy_lower": float(acc[3] / k),
                "pairs": k,
                "unreachable": self.unreachable[g],
            })
        return out

    def row(self, group="all") -> dict:
        return next(r for r in self.rows() if r["group"] == group)


def _group_key(group_by, tiers, m, d):
    if group_by == "none":
        return "all"
    if group_by == "destination_tier":
        return tiers[d].value
    if group_by == "attacker_tier":
        return tiers[m].value
    raise ValueError(group_by)


def sweep_destination(graph: AsGraph, d: int, attackers: Iterable[int], models: Sequence[PolicyModel],
                      group_by: str, tiers: TierAssignment | None, exact: bool = False) -> list[SweepReport]:
    """Partition sweep for one destination over many attackers and models."""
    reports = [SweepReport(model, group_by) for model in models]
    for m in attackers:
        if m == d:
            continue
        bases = {}
        for rep, model in zip(reports, models):
            if model.lpk not in bases:
                bases[model.lpk] = baseline_outcome(graph, m, d, model)
            pr = partition(graph, m, d, model, exact=exact, base=bases[model.lpk])
            if group_by == "source_tier":
                per = {}
                for v, lab in enumerate(pr.labels):
                    if lab is None:
                        continue
                    c = per.setdefault(tiers[v].value, {IMMUNE: 0, PROTECTABLE: 0, DOOMED: 0,
                                                         UNREACHABLE: 0, "happy": 0, "n": 0})
                    c[lab] += 1
                    c["n"] += 1
                    c["happy"] += 1 if bases[model.lpk].leads[v] == 1 else 0
                for g, c in per.items():
                    rep.add_fractions(g, c, c["happy"], c["n"])
            else:
                rep.add_fractions(_group_key(group_by, tiers, m, d), pr.counts,
                                  pr.baseline_lower, pr.n_sources)
    return reports



def partition_sweep(graph: AsGraph, M: Iterable[int], D: Iterable[int], model: PolicyModel,
                    group_by: str = "none", tiers: TierAssignment | None = None, *,
                    exact: bool = False, jobs: int = 1) -> SweepReport:
    """Average partition fractions over all (m, d) pairs with m != d."""
    if group_by not in GROUPINGS:
        raise ValueError(f"group_by must be one of {GROUPINGS}")
    if group_by != "none" and tiers is None:
        raise ValueError("tier grouping needs a TierAssignment")
    from .parallel import map_destinations

    M = sorted(set(M))
    D = sorted(set(D))
    total = SweepReport(model, group_by)
    for reps in map_destinations(graph, D, _sweep_task, (M, (model,), group_by, tiers, exact), jobs):
        total.merge(reps[0])
    return total


def _sweep_task(graph, d, M, models, group_by, tiers, exact):
    return sweep_destination(graph, d, M, models, group_by, tiers, exact)
