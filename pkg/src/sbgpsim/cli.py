"""Command-line front end: ``sbgpsim <command> [options]``.

Every command writes CSV tables plus a ``manifest.json`` into ``--out``.
Outputs depend only on the arguments and the graph contents, never on
``--jobs`` or wall-clock time. Exit status is 0 on success, 2 for bad
arguments or inputs, 3 when an internal invariant fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
from dataclasses import dataclass

from . import __version__
from . import analysis, oracle, partitions
from .fixtures import FIXTURES, load_fixture
from .policy import PolicyModel, SecurityRank
from .routing_engine import Scenario
from .topology import (
    DEFAULT_CP_ASNS, DEFAULT_MIN_DEGREE, STUB_TIERS, AsGraph, IxpMembership, Tier, TopologyError,
    augment_with_ixp, classify_tiers, load_relationships, open_text, preprocess, read_asn_list,
)

log = logging.getLogger("sbgpsim")

EXIT_USAGE = 2
EXIT_INVARIANT = 3
COMMANDS = ("partitions", "metric", "rollout", "downgrades", "rootcause", "wedgie")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated arguments plus the loaded graph and tiers."""

    args: argparse.Namespace
    graph: AsGraph
    tiers: object
    model: PolicyModel
    attackers: list
    destinations: list

    def manifest(self, extra: dict | None = None) -> dict:
        cfg = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        out = {
            "version": __version__,
            "config": cfg,
            "graph_sha256": self.graph.content_hash(),
            "graph_ases": self.graph.n,
            "model": self.model.label(),
            "attackers": len(self.attackers),
            "destinations": len(self.destinations),
        }
        if extra:
            out.update(extra)
        return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if isinstance(r, dict):
                r = [r[h] for h in header]
            w.writerow([_fmt(x) for x in r])


def write_manifest(out: str, data: dict) -> None:
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _read_asns(path: str) -> list[int]:
    try:
        with open_text(path) as fh:
            return read_asn_list(fh.read())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from e


def _to_ids(graph: AsGraph, asns, what: str) -> list[int]:
    missing = sorted(a for a in asns if not graph.has_asn(a))
    if missing:
        shown = ", ".join(map(str, missing[:10]))
        raise UsageError(f"{what}: ASNs not in graph: {shown}")
    return sorted({graph.index(a) for a in asns})


def select(spec: str, graph: AsGraph, tiers, what: str) -> list[int]:
    """Dense ids for ``all``, ``nonstub``, ``tier:NAME``, ``file:PATH``, ``sample:N:SEED``."""
    if spec == "all":
        ids = list(range(graph.n))
    elif spec == "nonstub":
        ids = [v for v in range(graph.n) if tiers[v] not in STUB_TIERS]
    elif spec.startswith("tier:"):
        try:
            tier = Tier(spec[5:])
        except ValueError:
            raise UsageError(f"{what}: unknown tier {spec[5:]!r}") from None
        ids = tiers.members(tier)
    elif spec.startswith("file:"):
        ids = _to_ids(graph, _read_asns(spec[5:]), what)
    elif spec.startswith("sample:"):
        parts = spec.split(":")
        try:
            n, seed = int(parts[1]), int(parts[2])
            pool = parts[3] if len(parts) > 3 else "all"
        except (IndexError, ValueError):
            raise UsageError(f"{what}: expected sample:N:SEED[:POOL], got {spec!r}") from None
        base = select(pool, graph, tiers, what)
        ids = sorted(random.Random(seed).sample(base, min(n, len(base))))
    else:
        raise UsageError(f"{what}: unknown selector {spec!r}")
    if not ids:
        raise UsageError(f"{what}: selector {spec!r} matched no ASes")
    return ids


def build_model(args) -> PolicyModel:
    try:
        return PolicyModel(SecurityRank(args.model), args.lpk)
    except ValueError as e:
        raise UsageError(str(e)) from e


def load_graph(args) -> tuple[AsGraph, object]:
    if args.fixture:
        graph = load_fixture(args.fixture).graph
    elif args.graph:
        try:
            graph = load_relationships(args.graph)
        except OSError as e:
            raise UsageError(f"cannot read graph {args.graph}: {e}") from e
    else:
        raise UsageError("one of --graph or --fixture is required")
    if args.ixp:
        try:
            with open_text(args.ixp) as fh:
                members = IxpMembership.parse(fh.read())
        except OSError as e:
            raise UsageError(f"cannot read IXP file {args.ixp}: {e}") from e
        aug = augment_with_ixp(graph, members)
        log.info("IXP augmentation added %d peer links", len(aug.added))
        graph = aug.graph
    seed = _read_asns(args.tier1_seed) if args.tier1_seed else None
    if seed and not args.no_preprocess:
        graph = preprocess(graph, seed, args.min_degree)
    cps = _read_asns(args.cp_list) if args.cp_list else DEFAULT_CP_ASNS
    tiers = classify_tiers(graph, cps, seed)
    return graph, tiers


def make_config(args) -> RunConfig:
    model = build_model(args)
    graph, tiers = load_graph(args)
    if graph.n < 3:
        raise UsageError("graph needs at least 3 ASes")
    M = select(args.attackers, graph, tiers, "--attackers")
    D = select(args.destinations, graph, tiers, "--destinations")
    if not any(m != d for d in D for m in M):
        raise UsageError("no (attacker, destination) pair with distinct ASes")
    os.makedirs(args.out, exist_ok=True)
    return RunConfig(args, graph, tiers, model, M, D)


def deployment(cfg: RunConfig) -> list[analysis.DeployStep]:
    """Deployment steps named by ``--deploy``; a single step unless it is a plan."""
    spec = cfg.args.deploy
    graph = cfg.graph
    if spec in ("none", ""):
        return [analysis.DeployStep("empty", frozenset())]
    if spec.startswith("file:"):
        S = frozenset(_to_ids(graph, _read_asns(spec[5:]), "--deploy"))
        label = os.path.basename(spec[5:])
        if cfg.args.simplex_stubs:
            stubs = frozenset(v for v in S if not graph.customers[v])
            return [analysis.DeployStep(label, S - stubs, stubs)]
        return [analysis.DeployStep(label, S)]
    if spec.startswith("plan:"):
        try:
            return analysis.plan_steps(spec[5:], graph, cfg.tiers, simplex=cfg.args.simplex_stubs,
                                       strict_stubs=cfg.args.strict_stubs)
        except ValueError as e:
            raise UsageError(str(e)) from e
    raise UsageError(f"--deploy: expected none, file:PATH or plan:NAME, got {spec!r}")


def _require_security(cfg):
    if not cfg.model.uses_security:
        raise UsageError(f"{cfg.args.command} needs --model first, second or third")


# commands

def cmd_partitions(cfg: RunConfig) -> dict:
    rep = partitions.partition_sweep(cfg.graph, cfg.attackers, cfg.destinations, cfg.model,
                                     group_by=cfg.args.group_by, tiers=cfg.tiers,
                                     exact=cfg.args.exact, jobs=cfg.args.jobs)
    header = ["group", "immune_frac", "protectable_frac", "doomed_frac",
              "baseline_happy_lower", "pairs", "unreachable"]
    rows = rep.rows()
    for r in rows:
        r["group"] = getattr(r["group"], "value", r["group"])
    write_csv(os.path.join(cfg.args.out, "partitions.csv"), header, rows)
    total = partitions.SweepReport(cfg.model, "none")
    for g in rep.sums:
        total.sums.setdefault("all", [0, 0, 0, 0])
        total.sums["all"] = [a + b for a, b in zip(total.sums["all"], rep.sums[g])]
        total.pairs["all"] = total.pairs.get("all", 0) + rep.pairs[g]
        total.unreachable["all"] = total.unreachable.get("all", 0) + rep.unreachable[g]
    agg = total.rows()
    write_csv(os.path.join(cfg.args.out, "partitions_all.csv"), header, agg)
    return {"outputs": ["partitions.csv", "partitions_all.csv"], "summary": agg[0] if agg else {}}


METRIC_HEADER = ["step", "model", "secure_ases", "simplex_ases", "h_lower", "h_upper",
                 "baseline_lower", "baseline_upper", "delta_lower", "delta_upper", "pairs",
                 "lower_stderr"]


def _metric_row(step, rep, model):
    row = {"step": step.label, "model": model.label(), "secure_ases": len(step.secure),
           "simplex_ases": len(step.simplex), "lower_stderr": rep.lower_stderr}
    row.update(rep.row())
    return row


def _per_destination_rows(cfg, step, rep):
    for d, lo, up, bl, bu in rep.destination_fractions():
        yield [step.label, cfg.graph.asns[d], lo, up, bl, bu, lo - bl, up - bu]


PER_DEST_HEADER = ["step", "destination", "h_lower", "h_upper", "baseline_lower",
                   "baseline_upper", "delta_lower", "delta_upper"]


def cmd_metric(cfg: RunConfig) -> dict:
    step = deployment(cfg)[-1]
    rep = analysis.metric(cfg.graph, cfg.attackers, cfg.destinations, step.secure, cfg.model,
                          step.simplex, jobs=cfg.args.jobs)
    row = _metric_row(step, rep, cfg.model)
    write_csv(os.path.join(cfg.args.out, "metric.csv"), METRIC_HEADER, [row])
    write_csv(os.path.join(cfg.args.out, "metric_per_destination.csv"), PER_DEST_HEADER,
              _per_destination_rows(cfg, step, rep))
    return {"outputs": ["metric.csv", "metric_per_destination.csv"], "deploy_step": step.label}


def cmd_rollout(cfg: RunConfig) -> dict:
    if not cfg.args.deploy.startswith("plan:"):
        raise UsageError("rollout needs --deploy plan:NAME")
    steps = deployment(cfg)
    pairs = analysis.pairs_by_destination(cfg.attackers, cfg.destinations)
    results = analysis.rollout(cfg.graph, cfg.tiers, steps, (), (), cfg.model, pairs=pairs,
                               jobs=cfg.args.jobs)
    rows, sec_rows, deltas, per_dest = [], [], [], []
    for i, r in enumerate(results):
        rows.append(_metric_row(r.step, r.metric, cfg.model))
        avg = r.secure_destination_average()
        avg["step"] = r.step.label
        sec_rows.append(avg)
        for rank, (d, dl, du) in enumerate(r.sorted_deltas()):
            deltas.append([r.step.label, rank, cfg.graph.asns[d], dl, du])
        per_dest.extend(_per_destination_rows(cfg, r.step, r.metric))
    out = cfg.args.out
    write_csv(os.path.join(out, "rollout.csv"), METRIC_HEADER, rows)
    write_csv(os.path.join(out, "rollout_secure_destinations.csv"),
              ["step", "destinations", "h_lower", "h_upper", "delta_lower", "delta_upper"], sec_rows)
    write_csv(os.path.join(out, "rollout_deltas.csv"),
              ["step", "rank", "destination", "delta_lower", "delta_upper"], deltas)
    write_csv(os.path.join(out, "rollout_per_destination.csv"), PER_DEST_HEADER, per_dest)
    return {"outputs": ["rollout.csv", "rollout_secure_destinations.csv", "rollout_deltas.csv",
                        "rollout_per_destination.csv"],
            "steps": [s.label for s in steps]}


def cmd_downgrades(cfg: RunConfig) -> dict:
    _require_security(cfg)
    step = deployment(cfg)[-1]
    reps = analysis.downgrade_table(cfg.graph, cfg.attackers, cfg.destinations, step.secure,
                                    cfg.model, step.simplex, jobs=cfg.args.jobs)
    asn = cfg.graph.asns
    header = ["attacker", "destination", "normal_secure", "excluded", "downgraded", "wasted",
              "protected"]
    write_csv(os.path.join(cfg.args.out, "downgrades.csv"), header,
              ([asn[r.m], asn[r.d], r.normal_secure, r.excluded, r.downgraded, r.wasted,
                r.protected] for r in reps))
    total = {k: sum(getattr(r, k) for r in reps) for k in header[2:]}
    return {"outputs": ["downgrades.csv"], "totals": total, "deploy_step": step.label}


def cmd_rootcause(cfg: RunConfig) -> dict:
    _require_security(cfg)
    step = deployment(cfg)[-1]
    rc = analysis.root_cause(cfg.graph, cfg.attackers, cfg.destinations, step.secure, cfg.model,
                             step.simplex, jobs=cfg.args.jobs)
    row = {"step": step.label, "model": cfg.model.label()}
    row.update(rc.row())
    header = ["step", "model", *rc.COUNTS]
    write_csv(os.path.join(cfg.args.out, "rootcause.csv"), header, [row])
    return {"outputs": ["rootcause.csv"], "deploy_step": step.label}


def cmd_wedgie(args) -> dict:
    """Distinct stable states under per-AS models (no attacker)."""
    if args.fixture:
        fx = load_fixture(args.fixture)
        graph = fx.graph
        d = fx.d if args.wedgie_destination is None else graph.index(args.wedgie_destination)
        S = fx.S
        per_as = fx.per_as_models(build_model(args))
    else:
        graph, _ = load_graph(args)
        if args.wedgie_destination is None:
            raise UsageError("wedgie on --graph needs --wedgie-destination")
        d = graph.index(args.wedgie_destination)
        S = frozenset(_to_ids(graph, _read_asns(args.deploy[5:]), "--deploy")) \
            if args.deploy.startswith("file:") else frozenset()
        per_as = [build_model(args)] * graph.n
    if args.models_file:
        with open_text(args.models_file) as fh:
            for line in fh:
                line = line.split("#", 1)[0].split()
                if line:
                    per_as[graph.index(int(line[0]))] = PolicyModel(SecurityRank(line[1]))
    links = []
    for spec in args.link or ():
        a, b = (int(x) for x in spec.split("-"))
        links.append((graph.index(a), graph.index(b)))
    if not links and args.fixture == "wedgie":
        links = [(graph.index(31027), graph.index(3))]
    sc = Scenario(d, None, S)
    states = oracle.wedgie_probe(graph, sc, per_as, seeds=range(args.seeds), link_events=links)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for i, st in enumerate(states):
        for v, p in enumerate(st):
            rows.append([i, graph.asns[v], "" if p is None else " ".join(str(graph.asns[x]) for x in p)])
    write_csv(os.path.join(args.out, "wedgie.csv"), ["state", "asn", "path"], rows)
    print(f"stable states: {len(states)}")
    return {"outputs": ["wedgie.csv"], "stable_states": len(states),
            "graph_sha256": graph.content_hash(), "version": __version__,
            "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbgpsim",
                                description="Partial-deployment S*BGP security simulations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("graph")
    g.add_argument("--graph", help="AS relationship file (a|b|rel), optionally .gz/.bz2")
    g.add_argument("--fixture", choices=FIXTURES, help="use a bundled fixture topology")
    g.add_argument("--ixp", help="IXP membership file (ixp_id,asn) adding peer links")
    g.add_argument("--tier1-seed", help="file of Tier-1 ASNs; enables pruning")
    g.add_argument("--min-degree", type=int, default=DEFAULT_MIN_DEGREE)
    g.add_argument("--no-preprocess", action="store_true", help="skip pruning even with a seed")
    g.add_argument("--cp-list", help="file of content-provider ASNs")
    r = common.add_argument_group("experiment")
    r.add_argument("--model", default="third", choices=[s.value for s in SecurityRank])
    r.add_argument("--lpk", type=int, default=None, metavar="K",
                   help="prefer routes up to K hops regardless of relationship")
    r.add_argument("--attackers", default="all",
                   help="all | nonstub | tier:NAME | file:PATH | sample:N:SEED[:POOL]")
    r.add_argument("--destinations", default="all", help="same forms as --attackers")
    r.add_argument("--deploy", default="none", help="none | file:PATH | plan:NAME")
    r.add_argument("--simplex-stubs", action="store_true")
    r.add_argument("--strict-stubs", action="store_true",
                   help="plan stubs need all providers secured, not just one")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="out")
    r.add_argument("-v", "--verbose", action="store_true")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "partitions":
            sp.add_argument("--group-by", default="destination_tier", choices=partitions.GROUPINGS)
            sp.add_argument("--exact", action="store_true",
                            help="exact labels for the security-first model")
        if name == "wedgie":
            sp.add_argument("--wedgie-destination", type=int, default=None, metavar="ASN")
            sp.add_argument("--models-file", help="lines 'ASN model' overriding --model")
            sp.add_argument("--link", action="append", metavar="A-B",
                            help="link to fail and restore (repeatable)")
            sp.add_argument("--seeds", type=int, default=200)
    return p


_HANDLERS = {
    "partitions": cmd_partitions, "metric": cmd_metric, "rollout": cmd_rollout,
    "downgrades": cmd_downgrades, "rootcause": cmd_rootcause,
}


def run(args) -> dict:
    if args.command == "wedgie":
        info = cmd_wedgie(args)
        write_manifest(args.out, info)
        return info
    cfg = make_config(args)
    info = _HANDLERS[args.command](cfg)
    write_manifest(args.out, cfg.manifest(info))
    return info


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        run(args)
    except analysis.InvariantViolation as e:
        print(f"sbgpsim: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except AssertionError as e:
        print(f"sbgpsim: internal check failed: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UsageError, TopologyError, KeyError, ValueError, OSError) as e:
        print(f"sbgpsim: {e}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
