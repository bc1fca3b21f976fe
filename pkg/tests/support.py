"""Helpers shared by the test modules."""

from __future__ import annotations

import random

from sbgpsim.oracle import best_response_fixed_point
from sbgpsim.routing_engine import Scenario, compute_outcome
from sbgpsim.synthetic import random_graph


def random_instance(rng: random.Random, max_n: int = 12, min_n: int = 2, attacker: bool | None = None,
                    simplex: bool = True):
    """Random graph plus a random (d, m, S, simplex) scenario."""
    n = rng.randint(min_n, max_n)
    g = random_graph(n, rng, p_edge=rng.uniform(0.15, 0.6), p_peer=rng.uniform(0.0, 0.5))
    d = rng.randrange(n)
    others = [v for v in range(n) if v != d]
    if attacker is None:
        m = rng.choice([None, *others]) if others else None
    elif attacker:
        m = rng.choice(others)
    else:
        m = None
    S = frozenset(v for v in range(n) if rng.random() < 0.5)
    sx = frozenset()
    if simplex:
        sx = frozenset(v for v in range(n) if v not in S and not g.customers[v] and rng.random() < 0.3)
    return g, Scenario(d, m, S, sx)


def engine_vs_oracle(g, sc, model, seed=0) -> list[str]:
    """Differences between the engine and best-response dynamics, per AS."""
    out = compute_outcome(g, sc, model)
    st = best_response_fixed_point(g, sc, model, seed)
    leads = st.leads_to(sc.destination, sc.attacker)
    bad = []
    for v in range(g.n):
        if v in (sc.destination, sc.attacker):
            continue
        s = out.summary(v)
        p = st.paths[v]
        route = out.canonical_route(v)
        ok = tuple(sorted(s.next_hops)) == tuple(sorted(st.ties[v])) and leads[v] == s.leads_to
        if p is None:
            ok = ok and route is None
        else:
            # the attacker announces "m, d", so oracle paths to m end with d
            if route is not None and route[-1] == sc.attacker:
                route = [*route, sc.destination]
            ok = ok and route is not None and tuple(route) == tuple(p)
        if not ok:
            bad.append(f"AS{g.asns[v]}: engine {s} {route} oracle {p} ties {st.ties[v]}")
    return bad
