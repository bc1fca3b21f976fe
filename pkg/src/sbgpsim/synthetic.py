"""Random topologies for tests and offline experiments."""

from __future__ import annotations

import random

from .topology import AsGraph


def random_graph(n: int, rng: random.Random, p_edge: float = 0.35, p_peer: float = 0.3,
                 first_asn: int = 1) -> AsGraph:
    """Random graph on ``n`` ASes with an acyclic customer-provider hierarchy.

    Every AS gets a random rank; an edge between two ASes is a peer link
    with probability ``p_peer`` and otherwise the higher-ranked AS is the
    provider. Unconnected ASes are allowed.
    """
    asns = list(range(first_asn, first_asn + n))
    rank = asns[:]
    rng.shuffle(rank)
    p2c, p2p = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() >= p_edge:
                continue
            a, b = asns[i], asns[j]
            if rng.random() < p_peer:
                p2p.append((a, b))
            elif rank[i] > rank[j]:
                p2c.append((a, b))
            else:
                p2c.append((b, a))
    return AsGraph.from_edges(p2c, p2p, asns=asns)


def internet_like(n: int, seed: int = 0, *, n_tier1: int = 13, tier2_frac: float = 0.04,
                  tier3_frac: float = 0.1, stub_peer_frac: float = 0.15) -> AsGraph:
    """Hierarchical graph loosely shaped like the AS-level Internet.

    A peering clique of Tier-1s, a layer of large transit ISPs, a layer of
    regional ISPs and a majority of stubs. Providers are picked with
    preferential attachment so customer degrees are heavy-tailed. Peering
    is added within transit layers and between a fraction of stubs and
    regional ISPs. ASNs are 1..n, Tier-1s first.
    """
    rng = random.Random(seed)
    n1 = min(n_tier1, n)
    n2 = max(1, int(n * tier2_frac))
    n3 = max(1, int(n * tier3_frac))
    t1 = list(range(1, n1 + 1))
    t2 = list(range(n1 + 1, n1 + n2 + 1))
    t3 = list(range(n1 + n2 + 1, n1 + n2 + n3 + 1))
    stubs = list(range(n1 + n2 + n3 + 1, n + 1))
    p2c: set = set()
    p2p: set = set()
    weight = {a: 1 for a in range(1, n + 1)}

    def pick(pool, k):
        chosen = set()
        k = min(k, len(pool))
        while len(chosen) < k:
            chosen.add(rng.choices(pool, weights=[weight[a] for a in pool])[0])
        return chosen

    for i, a in enumerate(t1):
        for b in t1[i + 1:]:
            p2p.add((a, b))
    for a in t2:
        for p in pick(t1, rng.randint(1, 3)):
            p2c.add((p, a))
            weight[p] += 1
    for a in t3:
        for p in pick(t1 + t2, rng.randint(1, 3)):
            p2c.add((p, a))
            weight[p] += 1
    transit = t2 + t3
    for a in stubs:
        for p in pick(transit, 1 + (rng.random() < 0.45) + (rng.random() < 0.1)):
            p2c.add((p, a))
            weight[p] += 1
    for layer, deg in ((t2, 6), (t3, 3)):
        for a in layer:
            for b in rng.sample(layer, min(deg, len(layer))):
                if a != b and (b, a) not in p2p and (a, b) not in p2c and (b, a) not in p2c:
                    p2p.add((a, b))
    for a in stubs:
        if rng.random() < stub_peer_frac:
            b = rng.choice(t3)
            if (b, a) not in p2c and (a, b) not in p2p and (b, a) not in p2p:
                p2p.add((a, b))
    return AsGraph.from_edges(sorted(p2c), sorted(p2p), asns=range(1, n + 1))
