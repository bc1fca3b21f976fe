"""Security metric, downgrade and collateral accounting, rollout sweeps.

Happiness is always reported as a pair of bounds: the lower bound counts
sources whose every tied route leads to d, the upper bound also counts
sources whose ties mix routes to d and to the attacker. All sums are kept
as integers and only divided when a fraction is read, so any reduction
order gives identical results.
"""

from __future__ import annotations

import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .parallel import map_destinations
from .policy import PolicyModel, SecurityRank
from .routing_engine import RoutingOutcome, Scenario, compute_outcome
from .topology import STUB_TIERS, AsGraph, Tier, TierAssignment

D_HAPPY, M_HAPPY, MIXED = 1, 2, 3


class InvariantViolation(AssertionError):
    """A property that must hold on every run did not."""


@dataclass(frozen=True)
class HappyBounds:
    lower: int
    upper: int
    denominator: int


def happy_bounds(outcome: RoutingOutcome) -> HappyBounds:
    """Sources surely / possibly routing to d, over |V| - 2."""
    if outcome.scenario.attacker is None:
        raise ValueError("happy_bounds needs an attack scenario")
    dest, _, mixed = outcome.counts()
    return HappyBounds(dest, dest + mixed, outcome.graph.n - 2)


def baseline_model(model: PolicyModel) -> PolicyModel:
    """The same local preference with nobody secure."""
    return PolicyModel(SecurityRank.INSECURE, model.lpk)


def pairs_by_destination(M: Iterable[int], D: Iterable[int]) -> list[tuple[int, list[int]]]:
    """All (m, d) with m != d grouped by destination, both sorted."""
    M = sorted(set(M))
    return [(d, [m for m in M if m != d]) for d in sorted(set(D))]


def sample_pairs(candidates_m: Sequence[int], candidates_d: Sequence[int], n_pairs: int,
                 seed: int) -> list[tuple[int, list[int]]]:
    """Uniform sample of distinct (m, d) pairs with m != d, grouped by d."""
    rng = random.Random(seed)
    M = sorted(set(candidates_m))
    D = sorted(set(candidates_d))
    total = len(M) * len(D) - len(set(M) & set(D))
    if n_pairs >= total:
        return pairs_by_destination(M, D)
    chosen = set()
    while len(chosen) < n_pairs:
        m, d = rng.choice(M), rng.choice(D)
        if m != d:
            chosen.add((m, d))
    grouped: dict[int, list[int]] = {}
    for m, d in sorted(chosen, key=lambda p: (p[1], p[0])):
        grouped.setdefault(d, []).append(m)
    return sorted(grouped.items())


def _scenario(d, m, S, simplex):
    return Scenario(d, m, frozenset(S) - frozenset(simplex), frozenset(simplex))


@dataclass
class DestCounts:
    """Integer sums over attackers for one destination."""

    d: int
    pairs: int = 0
    lower: int = 0
    upper: int = 0
    base_lower: int = 0
    base_upper: int = 0
    lower_sq: int = 0


@dataclass
class MetricReport:
    """Bounds on the average fraction of happy sources over (m, d) pairs.

    Each pair contributes happy counts over ``denominator = |V| - 2``
    sources; the fractions divide the sums by ``pairs * denominator``.
    """

    model: PolicyModel
    denominator: int
    per_destination: list = field(default_factory=list)

    def _sum(self, attr):
        return sum(getattr(c, attr) for c in self.per_destination)

    @property
    def pairs(self) -> int:
        return self._sum("pairs")

    def _frac(self, attr) -> float:
        total = self.pairs * self.denominator
        return self._sum(attr) / total if total else 0.0

    @property
    def h_lower(self) -> float:
        return self._frac("lower")

    @property
    def h_upper(self) -> float:
        return self._frac("upper")

    @property
    def baseline_lower(self) -> float:
        return self._frac("base_lower")

    @property
    def baseline_upper(self) -> float:
        return self._frac("base_upper")

    @property
    def delta_lower(self) -> float:
        return self.h_lower - self.baseline_lower

    @property
    def delta_upper(self) -> float:
        return self.h_upper - self.baseline_upper

    @property
    def lower_stderr(self) -> float:
        """Standard error of h_lower treating pairs as an i.i.d. sample."""
        k = self.pairs
        if k < 2 or not self.denominator:
            return 0.0
        s1 = self._sum("lower") / self.denominator
        s2 = self._sum("lower_sq") / self.denominator ** 2
        var = max(0.0, (s2 - s1 * s1 / k) / (k - 1))
        return math.sqrt(var / k)

    def destination_fractions(self) -> list[tuple[int, float, float, float, float]]:
        """Per destination: (d, lower, upper, baseline lower, baseline upper)."""
        out = []
        for c in self.per_destination:
            t = c.pairs * self.denominator
            if t:
                out.append((c.d, c.lower / t, c.upper / t, c.base_lower / t, c.base_upper / t))
        return out

    def row(self) -> dict:
        return {
            "h_lower": self.h_lower, "h_upper": self.h_upper,
            "baseline_lower": self.baseline_lower, "baseline_upper": self.baseline_upper,
            "delta_lower": self.delta_lower, "delta_upper": self.delta_upper,
            "pairs": self.pairs,
        }


def _dest_metric(graph, d, attackers, deployments, model):
    """Counts for one destination, for every deployment in ``deployments``.

    The baseline run per attacker is shared by all deployments.
    """
    base_model = baseline_model(model)
    out = [DestCounts(d) for _ in deployments]
    for m in attackers:
        base = compute_outcome(graph, Scenario(d, m), base_model, check=False)
        bl, _, bx = base.counts()
        for c, (S, simplex) in zip(out, deployments):
            if S or simplex:
                o = compute_outcome(graph, _scenario(d, m, S, simplex), model, check=False)
                lo, _, mx = o.counts()
            else:
                lo, mx = bl, bx
            c.pairs += 1
            c.lower += lo
            c.upper += lo + mx
            c.base_lower += bl
            c.base_upper += bl + bx
            c.lower_sq += lo * lo
    return out


def _validate_sets(graph, *sets):
    for s in sets:
        for v in s:
            if not 0 <= v < graph.n:
                raise ValueError(f"AS id {v} not in graph")


def metric(graph: AsGraph, M: Iterable[int], D: Iterable[int], S: Iterable[int],
           model: PolicyModel, simplex: Iterable[int] = (), *, pairs=None,
           jobs: int = 1) -> MetricReport:
    """Happy-source bounds for deployment ``S`` against the empty deployment.

    Args:
        M, D: attackers and destinations; pairs with m == d are skipped.
        S: secure ASes. ``simplex`` lists stubs running simplex S*BGP.
        pairs: optional explicit ``[(d, [m, ...]), ...]`` grouping that
            replaces ``M x D`` (see :func:`sample_pairs`).
        jobs: worker processes for the fan-out over destinations.
    """
    S = frozenset(S)
    simplex = frozenset(simplex)
    if pairs is None:
        M, D = list(M), list(D)
        if not M or not D:
            raise ValueError("M and D must be nonempty")
        pairs = pairs_by_destination(M, D)
    _validate_sets(graph, S, simplex, [d for d, _ in pairs], [m for _, ms in pairs for m in ms])
    return _metric_over(graph, pairs, [(S, simplex)], model, jobs)[0]


def _metric_over(graph, pairs, deployments, model, jobs):
    dests = [d for d, _ in pairs]
    attackers = dict(pairs)
    results = map_destinations(graph, dests, _metric_task, (attackers, deployments, model), jobs)
    reports = [MetricReport(model, graph.n - 2) for _ in deployments]
    for per_dep in results:
        for rep, c in zip(reports, per_dep):
            if c.pairs:
                rep.per_destination.append(c)
    return reports


def _metric_task(graph, d, attackers, deployments, model):
    return _dest_metric(graph, d, attackers[d], deployments, model)


@dataclass
class DowngradeReport:
    """Fate under attack of sources with secure normal-conditions routes.

    ``excluded`` counts secure sources whose normal route may pass through
    the attacker; the remaining ones are downgraded (insecure under
    attack), wasted (kept a secure route but were happy with nobody secure)
    or protected (kept a secure route and were not surely happy with
    nobody secure).
    """

    m: int
    d: int
    normal_secure: int = 0
    excluded: int = 0
    downgraded: int = 0
    wasted: int = 0
    protected: int = 0

    def check(self) -> None:
        if self.downgraded + self.wasted + self.protected != self.normal_secure - self.excluded:
            raise InvariantViolation(f"downgrade counts do not add up: {self}")


def downgrade_report(graph: AsGraph, m: int, d: int, S: Iterable[int], model: PolicyModel,
                     simplex: Iterable[int] = ()) -> DowngradeReport:
    if not model.uses_security:
        raise ValueError("downgrade_report needs a security model")
    normal = compute_outcome(graph, _scenario(d, None, S, simplex), model)
    attack = compute_outcome(graph, _scenario(d, m, S, simplex), model)
    base = compute_outcome(graph, Scenario(d, m), baseline_model(model))
    return _downgrade_counts(normal, attack, base, m, d)


def _downgrade_counts(normal, attack, base, m, d):
    rep = DowngradeReport(m, d)
    via = normal.contains(m)
    for s in range(normal.graph.n):
        if s == m or s == d or not normal.secure[s]:
            continue
        rep.normal_secure += 1
        if via[s] & 2:
            rep.excluded += 1
        elif not attack.secure[s]:
            rep.downgraded += 1
        elif base.leads[s] == D_HAPPY:
            rep.wasted += 1
        else:
            rep.protected += 1
    rep.check()
    return rep


def _downgrade_task(graph, d, attackers, S, simplex, model):
    out = []
    base_model = baseline_model(model)
    normal = compute_outcome(graph, _scenario(d, None, S, simplex), model, check=False)
    for m in attackers[d]:
        attack = compute_outcome(graph, _scenario(d, m, S, simplex), model, check=False)
        base = compute_outcome(graph, Scenario(d, m), base_model, check=False)
        out.append(_downgrade_counts(normal, attack, base, m, d))
    return out


def downgrade_table(graph: AsGraph, M: Iterable[int], D: Iterable[int], S: Iterable[int],
                    model: PolicyModel, simplex: Iterable[int] = (), *, pairs=None,
                    jobs: int = 1) -> list[DowngradeReport]:
    """:func:`downgrade_report` for every pair, ordered by (d, m)."""
    if not model.uses_security:
        raise ValueError("downgrade reports need a security model")
    if pairs is None:
        pairs = pairs_by_destination(M, D)
    S, simplex = frozenset(S), frozenset(simplex)
    _validate_sets(graph, S, simplex)
    dests = [d for d, _ in pairs]
    res = map_destinations(graph, dests, _downgrade_task, (dict(pairs), S, simplex, model), jobs)
    return [r for per_d in res for r in per_d]


@dataclass
class CollateralReport:
    """Happiness changes between the empty deployment and S, under attack.

    Sources holding a secure route under attack are counted as newly
    protected (not surely happy with nobody secure) or wasted. Every other
    source is compared by lead-to class: a benefit goes from unhappy to
    happy, a damage from happy to unhappy, where having no route at all
    counts as unhappy. A source that is Mixed at both ends but whose tie
    routes are all unchanged cannot flip and is counted in neither set. Determinate sets need both ends
    determinate; the ``possible_*`` sets also admit tie-dependent ends.
    """

    m: int
    d: int
    benefits: frozenset
    damages: frozenset
    possible_benefits: frozenset
    possible_damages: frozenset
    newly_protected: int
    wasted: int
    delta_lower: int
    delta_upper: int

    @property
    def indeterminate(self) -> frozenset:
        return (self.possible_benefits | self.possible_damages) - self.benefits - self.damages

    def check(self) -> None:
        if self.benefits & self.damages:
            raise InvariantViolation("a source is both a benefit and a damage")
        lo = self.newly_protected + len(self.benefits) - len(self.possible_damages)
        hi = self.newly_protected + len(self.possible_benefits) - len(self.damages)
        if not lo <= self.delta_lower <= hi:
            raise InvariantViolation(
                f"delta reconstruction failed for (m={self.m}, d={self.d}): "
                f"{lo} <= {self.delta_lower} <= {hi}")


def collateral_report(graph: AsGraph, m: int, d: int, S: Iterable[int], model: PolicyModel,
                      simplex: Iterable[int] = ()) -> CollateralReport:
    attack = compute_outcome(graph, _scenario(d, m, S, simplex), model)
    base = compute_outcome(graph, Scenario(d, m), baseline_model(model))
    return _collateral(attack, base, m, d)


def _unchanged(attack, base):
    """ASes whose every tie route is the same in both outcomes.

    Tiebreaks are fixed per AS, so such an AS ends up on the same route at
    both deployments whatever the tiebreak.
    """
    same = bytearray(attack.graph.n)
    for v in attack.order:
        hops = attack.next_hops[v]
        same[v] = set(hops) == set(base.next_hops[v]) and all(same[u] for u in hops)
    return same


def _collateral(attack, base, m, d):
    ben, dam, pben, pdam = [], [], [], []
    newly = wasted = 0
    dl = du = 0
    h0s, h1s, sec = base.leads, attack.leads, attack.secure
    same = None
    for s in range(attack.graph.n):
        if s == m or s == d:
            continue
        h0, h1 = h0s[s], h1s[s]
        if h0 == h1 == MIXED:
            if same is None:
                same = _unchanged(attack, base)
            if same[s]:
                continue
        dl += (h1 == D_HAPPY) - (h0 == D_HAPPY)
        du += (h1 & 1) - (h0 & 1)
        if sec[s]:
            if h0 == D_HAPPY:
                wasted += 1
            else:
                newly += 1
            continue
        # no route at all counts as unhappy; it can appear at S when a
        # neighbor switches to a secure route it no longer exports
        if h0 != D_HAPPY and h1 & 1:
            pben.append(s)
            if not h0 & 1 and h1 == D_HAPPY:
                ben.append(s)
        if h0 & 1 and h1 != D_HAPPY:
            pdam.append(s)
            if h0 == D_HAPPY and not h1 & 1:
                dam.append(s)
    rep = CollateralReport(m, d, frozenset(ben), frozenset(dam), frozenset(pben),
                           frozenset(pdam), newly, wasted, dl, du)
    rep.check()
    return rep


@dataclass
class RootCause:
    """Root-cause decomposition summed over (m, d) pairs.

    Fractions are over (m, d, source) triples, i.e. divided by
    ``pairs * (|V| - 2)``.
    """

    model: PolicyModel
    denominator: int
    pairs: int = 0
    normal_secure: int = 0
    excluded: int = 0
    downgraded: int = 0
    wasted: int = 0
    protected: int = 0
    newly_protected: int = 0
    benefits_lower: int = 0
    benefits_upper: int = 0
    damages_lower: int = 0
    damages_upper: int = 0
    delta_lower: int = 0
    delta_upper: int = 0

    COUNTS = ("pairs", "normal_secure", "excluded", "downgraded", "wasted", "protected",
              "newly_protected", "benefits_lower", "benefits_upper", "damages_lower",
              "damages_upper", "delta_lower", "delta_upper")

    def add(self, dg: DowngradeReport, col: CollateralReport) -> None:
        self.pairs += 1
        for k in ("normal_secure", "excluded", "downgraded", "wasted", "protected"):
            setattr(self, k, getattr(self, k) + getattr(dg, k))
        self.newly_protected += col.newly_protected
        self.benefits_lower += len(col.benefits)
        self.benefits_upper += len(col.possible_benefits)
        self.damages_lower += len(col.damages)
        self.damages_upper += len(col.possible_damages)
        self.delta_lower += col.delta_lower
        self.delta_upper += col.delta_upper

    def merge(self, other: RootCause) -> None:
        for k in self.COUNTS:
            setattr(self, k, getattr(self, k) + getattr(other, k))

    def check(self) -> None:
        lo = self.newly_protected + self.benefits_lower - self.damages_upper
        hi = self.newly_protected + self.benefits_upper - self.damages_lower
        if not lo <= self.delta_lower <= hi:
            raise InvariantViolation(f"root-cause reconstruction failed: {lo} <= {self.delta_lower} <= {hi}")

    def fraction(self, name: str) -> float:
        total = self.pairs * self.denominator
        return getattr(self, name) / total if total else 0.0

    def row(self) -> dict:
        return {k: (self.fraction(k) if k != "pairs" else self.pairs) for k in self.COUNTS}


def _rootcause_task(graph, d, attackers, S, simplex, model):
    rc = RootCause(model, graph.n - 2)
    base_model = baseline_model(model)
    normal = compute_outcome(graph, _scenario(d, None, S, simplex), model, check=False)
    for m in attackers[d]:
        attack = compute_outcome(graph, _scenario(d, m, S, simplex), model, check=False)
        base = compute_outcome(graph, Scenario(d, m), base_model, check=False)
        rc.add(_downgrade_counts(normal, attack, base, m, d), _collateral(attack, base, m, d))
    return rc


def root_cause(graph: AsGraph, M: Iterable[int], D: Iterable[int], S: Iterable[int],
               model: PolicyModel, simplex: Iterable[int] = (), *, pairs=None,
               jobs: int = 1) -> RootCause:
    """Downgrade and collateral accounting summed over all pairs."""
    if not model.uses_security:
        raise ValueError("root_cause needs a security model")
    if pairs is None:
        pairs = pairs_by_destination(M, D)
    S, simplex = frozenset(S), frozenset(simplex)
    _validate_sets(graph, S, simplex)
    total = RootCause(model, graph.n - 2)
    dests = [d for d, _ in pairs]
    for rc in map_destinations(graph, dests, _rootcause_task, (dict(pairs), S, simplex, model), jobs):
        total.merge(rc)
    total.check()
    return total


# deployment plans

ROLLOUT_PLANS = ("tier1and2", "tier2only", "nonstubs", "tier1stubscp")
TIER1AND2_STEPS = ((13, 13), (13, 37), (13, 100))
TIER2ONLY_STEPS = (13, 26, 50, 100)


@dataclass(frozen=True)
class DeployStep:
    label: str
    secure: frozenset
    simplex: frozenset = frozenset()


def stubs_of(graph: AsGraph, tiers: TierAssignment, secured: Iterable[int], *,
             strict: bool = False) -> set[int]:
    """Stub ASes with a secured provider (all providers when ``strict``)."""
    secured = set(secured)
    out = set()
    for v in range(graph.n):
        if tiers[v] not in STUB_TIERS or not graph.providers[v]:
            continue
        hits = [p in secured for p in graph.providers[v]]
        if all(hits) if strict else any(hits):
            out.add(v)
    return out


def _take(tiers: TierAssignment, tier: Tier, k: int) -> list[int]:
    members = tiers.members(tier)
    if k > len(members):
        raise ValueError(f"plan needs {k} {tier.value} ASes but the graph has {len(members)}")
    return members[:k]


def plan_steps(plan: str, graph: AsGraph, tiers: TierAssignment, *, simplex: bool = False,
               strict_stubs: bool = False, steps: Sequence | None = None) -> list[DeployStep]:
    """Deployment sets for a rollout plan.

    Plans:
        tier1and2: X Tier-1s, Y Tier-2s and their stubs, for (X, Y) steps.
        tier2only: the Y largest Tier-2s and their stubs.
        nonstubs: every non-stub AS.
        tier1stubscp: Tier-1s, their stubs, and the content providers.

    With ``simplex``, stubs in each set run simplex S*BGP instead.
    """
    plan = plan.lower()
    out = []
    if plan == "tier1and2":
        for x, y in steps or TIER1AND2_STEPS:
            core = _take(tiers, Tier.TIER1, x) + _take(tiers, Tier.TIER2, y)
            out.append((f"T1={x},T2={y}", set(core) | stubs_of(graph, tiers, core, strict=strict_stubs)))
    elif plan == "tier2only":
        for y in steps or TIER2ONLY_STEPS:
            core = _take(tiers, Tier.TIER2, y)
            out.append((f"T2={y}", set(core) | stubs_of(graph, tiers, core, strict=strict_stubs)))
    elif plan == "nonstubs":
        out.append(("nonstubs", set(tiers.non_stubs())))
    elif plan == "tier1stubscp":
        t1 = tiers.members(Tier.TIER1)
        if not t1:
            raise ValueError("plan needs Tier1 ASes but the graph has none")
        S = set(t1) | stubs_of(graph, tiers, t1, strict=strict_stubs) | set(tiers.members(Tier.CP))
        out.append(("T1+stubs+CP", S))
    else:
        raise ValueError(f"unknown plan {plan!r}; expected one of {ROLLOUT_PLANS}")
    result = []
    for label, S in out:
        if simplex:
            stubs = {v for v in S if not graph.customers[v]}
            result.append(DeployStep(label, frozenset(S - stubs), frozenset(stubs)))
        else:
            result.append(DeployStep(label, frozenset(S)))
    return result


@dataclass
class RolloutStep:
    step: DeployStep
    metric: MetricReport

    @property
    def size(self) -> int:
        return len(self.step.secure) + len(self.step.simplex)

    def secure_destinations(self) -> list[tuple[int, float, float, float, float]]:
        members = self.step.secure | self.step.simplex
        return [r for r in self.metric.destination_fractions() if r[0] in members]

    def secure_destination_average(self) -> dict:
        rows = self.secure_destinations()
        k = len(rows)
        if not k:
            return {"destinations": 0, "h_lower": 0.0, "h_upper": 0.0, "delta_lower": 0.0,
                    "delta_upper": 0.0}
        return {
            "destinations": k,
            "h_lower": sum(r[1] for r in rows) / k,
            "h_upper": sum(r[2] for r in rows) / k,
            "delta_lower": sum(r[1] - r[3] for r in rows) / k,
            "delta_upper": sum(r[2] - r[4] for r in rows) / k,
        }

    def sorted_deltas(self) -> list[tuple[int, float, float]]:
        """(d, delta lower, delta upper) for secure destinations, by delta."""
        rows = [(d, lo - bl, up - bu) for d, lo, up, bl, bu in self.secure_destinations()]
        return sorted(rows, key=lambda r: (r[1], r[2], r[0]))


def rollout(graph: AsGraph, tiers: TierAssignment, plan: str | Sequence[DeployStep],
            M: Iterable[int], D: Iterable[int], model: PolicyModel, *, simplex: bool = False,
            strict_stubs: bool = False, pairs=None, jobs: int = 1) -> list[RolloutStep]:
    """Metric for every step of a deployment plan over the same pairs."""
    if isinstance(plan, str):
        steps = plan_steps(plan, graph, tiers, simplex=simplex, strict_stubs=strict_stubs)
    else:
        steps = list(plan)
    if pairs is None:
        pairs = pairs_by_destination(M, D)
    reports = _metric_over(graph, pairs, [(s.secure, s.simplex) for s in steps], model, jobs)
    return [RolloutStep(s, r) for s, r in zip(steps, reports)]
