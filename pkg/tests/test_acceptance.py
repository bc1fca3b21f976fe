"""Acceptance criteria, one test each; verdicts are printed in the run summary.

Criterion 5 needs a CAIDA-style serial-1 snapshot named by the
SBGPSIM_SNAPSHOT environment variable (optional SBGPSIM_TIER1 for a Tier-1
seed file). Without it only the synthetic qualitative proxy runs.
"""

from __future__ import annotations

import collections
import os
import random
import time

import pytest

from sbgpsim import analysis, cli
from sbgpsim.fixtures import FIRST, SECOND, load_fixture
from sbgpsim.oracle import (
    MODELS_3, best_response_fixed_point, enumerate_deployments, has_cover,
    max_k_security_bruteforce, random_set_cover, set_cover_gadget, wedgie_probe,
)
from sbgpsim.partitions import DOOMED, IMMUNE, partition, partition_sweep
from sbgpsim.policy import PolicyModel, SecurityRank
from sbgpsim.routing_engine import LeadsTo, Scenario, compute_outcome
from sbgpsim.synthetic import internet_like
from sbgpsim.topology import Tier, classify_tiers, load_relationships, preprocess, read_asn_list

from support import engine_vs_oracle, random_instance

THIRD = PolicyModel(SecurityRank.THIRD)
INSECURE = PolicyModel(SecurityRank.INSECURE)


def _verdict(record, key, ok, detail):
    record(key, f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_1_engine_matches_oracle(record):
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    mismatched, first = 0, None
    for _ in range(1000):
        g, sc = random_instance(rng, max_n=12)
        for model in MODELS_3:
            bad = engine_vs_oracle(g, sc, model, rng.randrange(1 << 30))
            if bad:
                mismatched += 1
                first = first or (sc, model, bad[:3])
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and elapsed < 300
    _verdict(record, "1", ok, f"{mismatched} mismatching runs of 3000, {elapsed:.1f}s")
    assert mismatched == 0, first
    assert elapsed < 300


def test_criterion_2_partitions_match_enumeration(record):
    rng = random.Random(777)
    violations = collections.Counter()
    checked = 0
    example = None
    for _ in range(500):
        g, sc = random_instance(rng, max_n=10, min_n=3, attacker=True, simplex=False)
        m, d = sc.attacker, sc.destination
        for model in (SECOND, THIRD):
            ours = partition(g, m, d, model).labels
            truth = enumerate_deployments(g, m, d, model)
            for v, lab in truth.items():
                checked += 1
                if ours[v] != lab:
                    violations[model.label()] += 1
                    example = example or (g.to_text(), m, d, model, v, ours[v], lab)
        ours = partition(g, m, d, FIRST, exact=True).labels
        truth = enumerate_deployments(g, m, d, FIRST)
        for v, lab in truth.items():
            checked += 1
            if ours[v] in (DOOMED, IMMUNE) and ours[v] != lab:
                violations["first"] += 1
                example = example or (g.to_text(), m, d, FIRST, v, ours[v], lab)
    total = sum(violations.values())
    _verdict(record, "2", total == 0, f"{total} violations over {checked} labels {dict(violations)}")
    assert total == 0, example


def test_criterion_3_invariant_audits(record):
    rng = random.Random(31337)
    # unique fixed point under homogeneous models
    multi = 0
    for _ in range(20):
        g, sc = random_instance(rng, max_n=10)
        for model in MODELS_3:
            states = {best_response_fixed_point(g, sc, model, seed).paths for seed in range(200)}
            multi += len(states) != 1
    # no downgrades under security first for routes avoiding m
    downgrades = 0
    pairs = 0
    for _ in range(1000):
        g, sc = random_instance(rng, max_n=12, attacker=True)
        rep = analysis.downgrade_report(g, sc.attacker, sc.destination, sc.secure_set, FIRST,
                                        sc.simplex_stubs)
        downgrades += rep.downgraded
        pairs += 1
    # happiness monotone in S under security third
    violations = 0
    for _ in range(200):
        g, sc = random_instance(rng, max_n=10, min_n=3, attacker=True, simplex=False)
        m, d = sc.attacker, sc.destination
        S = sc.secure_set
        T = S | {v for v in range(g.n) if rng.random() < 0.5}
        ls = best_response_fixed_point(g, Scenario(d, m, S), THIRD).leads_to(d, m)
        lt = best_response_fixed_point(g, Scenario(d, m, T), THIRD).leads_to(d, m)
        violations += sum(1 for v in range(g.n) if ls[v] == LeadsTo.DESTINATION
                          and lt[v] != LeadsTo.DESTINATION)
    ok = multi == 0 and downgrades == 0 and violations == 0
    _verdict(record, "3", ok, f"(a) {multi} instances with several fixed points; "
             f"(b) {downgrades} downgrades over {pairs} pairs; (c) {violations} monotonicity violations")
    assert multi == 0
    assert downgrades == 0
    assert violations == 0


def test_criterion_4_fixtures(record):
    results = {}
    f = load_fixture("downgrade")
    dg = analysis.downgrade_report(f.graph, f.m, f.d, f.S, SECOND)
    normal = compute_outcome(f.graph, Scenario(f.d, None, f.S), SECOND)
    attack = compute_outcome(f.graph, Scenario(f.d, f.m, f.S), SECOND)
    v = f.idx(21740)
    results["downgrade"] = (dg.downgraded == 1 and normal.secure[v] and normal.summary(v).length == 1
                       and not attack.secure[v] and attack.leads[v] == LeadsTo.ATTACKER)
    f = load_fixture("collateral_second")
    c = analysis.collateral_report(f.graph, f.m, f.d, f.S, SECOND)
    results["collateral_second"] = f.idx(5166) in c.benefits and f.idx(52142) in c.damages
    f = load_fixture("collateral_first")
    c = analysis.collateral_report(f.graph, f.m, f.d, f.S, FIRST)
    results["collateral_first"] = f.idx(4805) in c.damages
    f = load_fixture("wedgie")
    states = wedgie_probe(f.graph, Scenario(f.d, None, f.S), f.per_as_models(SECOND),
                          link_events=[(f.idx(31027), f.idx(3))])
    results["wedgie"] = len(states) == 2
    rng = random.Random(12)
    gadget_ok = 0
    for _ in range(20):
        n, subsets, gamma = random_set_cover(rng)
        gad = set_cover_gadget(n, subsets, gamma)
        best = max_k_security_bruteforce(gad.graph, gad.m, gad.d, gad.k, SECOND)
        gadget_ok += (best.happy + 1 == gad.target) == has_cover(n, subsets, gamma)
    results["setcover"] = gadget_ok == 20
    ok = all(results.values())
    _verdict(record, "4", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in results.items())
             + f" (gadget {gadget_ok}/20)")
    assert ok, results


def _internet_scale_numbers(graph, tiers, M, D, jobs):
    base = analysis.metric(graph, M, D, (), INSECURE, jobs=jobs)
    not_doomed = {}
    for model in MODELS_3:
        rep = partition_sweep(graph, M, D, model, jobs=jobs)
        row = rep.row("all")
        not_doomed[model.security.value] = row["immune_frac"] + row["protectable_frac"]
    t1 = [d for d in D if tiers[d] is Tier.TIER1] or tiers.members(Tier.TIER1)
    by_tier = partition_sweep(graph, M, D + [d for d in t1 if d not in D], THIRD,
                              group_by="destination_tier", tiers=tiers, jobs=jobs)
    doomed = {r["group"]: r["doomed_frac"] for r in by_tier.rows()}
    return base.h_lower, not_doomed, doomed


def _rollout_deltas(graph, tiers, M, D, jobs):
    out = {}
    steps = analysis.plan_steps("tier1and2", graph, tiers)[-1:]
    for model in MODELS_3:
        res = analysis.rollout(graph, tiers, steps, M, D, model, jobs=jobs)
        out[model.security.value] = res[-1].metric.delta_lower
    return out


def _qualitative(not_doomed, doomed, deltas):
    return {
        "not-doomed first>=second>=third":
            not_doomed["first"] >= not_doomed["second"] >= not_doomed["third"],
        "Tier1 destinations most doomed": doomed.get(Tier.TIER1.value, 0) >= max(doomed.values()),
        "delta first>second>third": deltas["first"] > deltas["second"] > deltas["third"],
    }


def _describe(h0, nd, doomed, deltas, checks):
    holds = "; ".join(f"{k} {'holds' if v else 'BROKEN'}" for k, v in checks.items())
    return (f"baseline {h0:.3f}, not-doomed "
            + "/".join(f"{nd[k]:.3f}" for k in ("first", "second", "third"))
            + f", Tier1-dest doomed {doomed.get(Tier.TIER1.value, 0):.3f}"
            + ", rollout deltas " + "/".join(f"{deltas[k]:.3f}" for k in ("first", "second", "third"))
            + f"; {holds}")


def test_criterion_5_internet_scale(record):
    jobs = min(8, os.cpu_count() or 1)
    path = os.environ.get("SBGPSIM_SNAPSHOT")
    if not path:
        # a synthetic hierarchy stands in for the snapshot; it is reported,
        # not judged, since its tier structure is not the Internet's
        g = internet_like(2500, seed=5)
        tiers = classify_tiers(g, ())
        sample = sorted(random.Random(1).sample(range(g.n), 30))
        h0, nd, doomed = _internet_scale_numbers(g, tiers, sample, sample, jobs)
        deltas = _rollout_deltas(g, tiers, sample, sample, jobs)
        proxy = _describe(h0, nd, doomed, deltas, _qualitative(nd, doomed, deltas))
        record("5", "criterion 5: NOT ASSESSED - no relationship snapshot available "
                    f"(set SBGPSIM_SNAPSHOT); synthetic proxy: {proxy}")
        pytest.skip("SBGPSIM_SNAPSHOT not set; only the synthetic proxy ran")
    t0 = time.perf_counter()
    graph = load_relationships(path)
    seed_path = os.environ.get("SBGPSIM_TIER1")
    seed = None
    if seed_path:
        with open(seed_path) as fh:
            seed = read_asn_list(fh.read())
        graph = preprocess(graph, seed)
    tiers = classify_tiers(graph, tier1_seed=seed)
    sample = sorted(random.Random(2012).sample(range(graph.n), 46))  # 2070 ordered pairs
    h0, nd, doomed = _internet_scale_numbers(graph, tiers, sample, sample, jobs)
    deltas = _rollout_deltas(graph, tiers, sample, sample, jobs)
    elapsed = time.perf_counter() - t0
    within = (abs(h0 - 0.60) <= 0.05 and abs(nd["first"] - 1.00) <= 0.05
              and abs(nd["second"] - 0.89) <= 0.05 and abs(nd["third"] - 0.75) <= 0.05
              and abs(doomed.get(Tier.TIER1.value, 0) - 0.80) <= 0.08)
    checks = _qualitative(nd, doomed, deltas)
    ok = within or all(checks.values())
    record("5", f"criterion 5: {'PASS' if ok else 'FAIL'} - snapshot "
                + _describe(h0, nd, doomed, deltas, checks)
                + f"; {'within' if within else 'outside'} tolerance, {elapsed:.0f}s")
    assert ok


def test_criterion_6_parallel_determinism(tmp_path, record):
    g = internet_like(600, seed=9)
    graph_file = tmp_path / "g.txt"
    graph_file.write_text(g.to_text())
    outs = []
    for jobs in (1, 8):
        out = tmp_path / f"jobs{jobs}"
        rc = cli.main(["metric", "--graph", str(graph_file), "--model", "second",
                       "--attackers", "sample:25:3", "--destinations", "sample:25:4",
                       "--deploy", "plan:tier1and2", "--jobs", str(jobs), "--out", str(out)])
        assert rc == 0
        outs.append({p: (out / p).read_bytes() for p in ("metric.csv", "metric_per_destination.csv")})
    same = outs[0] == outs[1]
    _verdict(record, "6", same, "metric CSVs byte-identical for --jobs 1 and --jobs 8" if same
             else "metric CSVs differ between --jobs 1 and --jobs 8")
    assert same
