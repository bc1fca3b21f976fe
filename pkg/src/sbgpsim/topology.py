"""AS-level topology: parsing, preprocessing, IXP augmentation, tiers.

Graphs are stored with dense integer ids ``0..n-1``; the original AS numbers
are kept in a side map. All public operations return new graphs, an
:class:`AsGraph` is never mutated after construction.
"""

from __future__ import annotations

import bz2
import gzip
import hashlib
import io
import logging
import os
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import IO, NamedTuple, Union

logger = logging.getLogger(__name__)

P2C = -1
P2P = 0

DEFAULT_MIN_DEGREE = 10

DEFAULT_CP_ASNS = (
    15169, 8075, 20940, 22822, 32934, 15133, 16265, 16509, 2906,
    23286, 40428, 714, 10310, 38365, 14907, 13414, 4837,
)

_REL_LINE = re.compile(r"^\s*(\d+)\s*\|\s*(\d+)\s*\|\s*(-?\d+)\s*(?:\|.*)?$")

# str and bytes are content; os.PathLike objects are opened as files.
Source = Union[str, bytes, os.PathLike, IO[str], IO[bytes], Iterable[str]]


class TopologyError(ValueError):
    """Invalid topology input."""


class ParseError(TopologyError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


class RelationshipConflict(TopologyError):
    def __init__(self, a: int, b: int, first: str, second: str):
        super().__init__(f"conflicting relationships for AS pair ({a}, {b}): {first} vs {second}")
        self.pair = (a, b)


class Relationship(IntEnum):
    """Role of a neighbor relative to the owning AS.

    The integer value doubles as the route type: a route learned from a
    neighbor whose role is ``CUSTOMER`` is a customer route.
    """

    CUSTOMER = 0
    PEER = 1
    PROVIDER = 2


class AsGraph:
    """Immutable AS graph with customer, peer and provider adjacency.

    Attributes:
        asns: original AS number of every dense id.
        customers, peers, providers: per-AS sorted tuples of neighbor ids.
    """

    __slots__ = ("asns", "customers", "peers", "providers", "_index", "_rel", "_hash")

    def __init__(self, asns, customers, peers, providers):
        self.asns = tuple(asns)
        self.customers = tuple(tuple(sorted(c)) for c in customers)
        self.peers = tuple(tuple(sorted(p)) for p in peers)
        self.providers = tuple(tuple(sorted(p)) for p in providers)
        n = len(self.asns)
        if not (len(self.customers) == len(self.peers) == len(self.providers) == n):
            raise TopologyError("adjacency lists do not match the number of ASes")
        self._index = {a: i for i, a in enumerate(self.asns)}
        if len(self._index) != n:
            raise TopologyError("duplicate ASN in asn map")
        self._rel = None
        self._hash = None

    @classmethod
    def from_edges(
        cls,
        p2c: Iterable[tuple[int, int]] = (),
        p2p: Iterable[tuple[int, int]] = (),
        asns: Iterable[int] = (),
    ) -> AsGraph:
        """Build a graph from (provider, customer) and peer pairs of ASNs.

        Dense ids follow ascending ASN order. Isolated ASes can be added via
        ``asns``. Exact duplicates are merged; contradictions raise
        :class:`RelationshipConflict`.
        """
        seen: dict[tuple[int, int], tuple[str, int, int]] = {}
        nodes = set(asns)

        def add(a, b, kind):
            if a == b:
                raise TopologyError(f"self-loop on AS {a}")
            key = (a, b) if a < b else (b, a)
            rec = (kind, a, b) if kind == "p2c" else (kind,) + key
            old = seen.get(key)
            if old is not None and old != rec:
                raise RelationshipConflict(key[0], key[1], _describe(old), _describe(rec))
            seen[key] = rec
            nodes.add(a)
            nodes.add(b)

        for a, b in p2c:
            add(a, b, "p2c")
        for a, b in p2p:
            add(a, b, "p2p")
        order = sorted(nodes)
        index = {a: i for i, a in enumerate(order)}
        customers = [[] for _ in order]
        peers = [[] for _ in order]
        providers = [[] for _ in order]
        for kind, a, b in seen.values():
            ia, ib = index[a], index[b]
            if kind == "p2c":
                customers[ia].append(ib)
                providers[ib].append(ia)
            else:
                peers[ia].append(ib)
                peers[ib].append(ia)
        return cls(order, customers, peers, providers)

    @property
    def n(self) -> int:
        return len(self.asns)

    def __len__(self) -> int:
        return len(self.asns)

    def __repr__(self) -> str:
        return (f"AsGraph(n={self.n}, customer_provider={self.num_customer_provider}, "
                f"peer={self.num_peer})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, AsGraph):
            return NotImplemented
        return (self.asns == other.asns and self.customers == other.customers
                and self.peers == other.peers and self.providers == other.providers)

    def __hash__(self) -> int:
        return hash(self.content_hash())

    def __getstate__(self):
        return (self.asns, self.customers, self.peers, self.providers)

    def __setstate__(self, state):
        asns, customers, peers, providers = state
        self.asns, self.customers, self.peers, self.providers = asns, customers, peers, providers
        self._index = {a: i for i, a in enumerate(asns)}
        self._rel = None
        self._hash = None

    @property
    def num_customer_provider(self) -> int:
        return sum(len(c) for c in self.customers)

    @property
    def num_peer(self) -> int:
        return sum(len(p) for p in self.peers) // 2

    def index(self, asn: int) -> int:
        """Dense id of an original ASN."""
        try:
            return self._index[asn]
        except KeyError:
            raise KeyError(f"AS {asn} not in graph") from None

    def has_asn(self, asn: int) -> bool:
        return asn in self._index

    def asn(self, v: int) -> int:
        return self.asns[v]

    def neighbors(self, v: int) -> Iterator[tuple[int, Relationship]]:
        for u in self.customers[v]:
            yield u, Relationship.CUSTOMER
        for u in self.peers[v]:
            yield u, Relationship.PEER
        for u in self.providers[v]:
            yield u, Relationship.PROVIDER

    def degree(self, v: int) -> int:
        return len(self.customers[v]) + len(self.peers[v]) + len(self.providers[v])

    def relationship(self, v: int, u: int) -> Relationship | None:
        """Role of ``u`` relative to ``v``, or None when not adjacent."""
        if self._rel is None:
            self._rel = [dict(self.neighbors(x)) for x in range(self.n)]
        return self._rel[v].get(u)

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(a, b, code)`` in relationship-file convention on dense ids."""
        for a in range(self.n):
            for b in self.customers[a]:
                yield a, b, P2C
            for b in self.peers[a]:
                if a < b:
                    yield a, b, P2P

    def is_stub(self, v: int) -> bool:
        return not self.customers[v]

    def validate(self) -> None:
        """Full-scan consistency check of the three relationship views."""
        for v in range(self.n):
            seen = set()
            for u, rel in self.neighbors(v):
                if u == v:
                    raise TopologyError(f"self-loop on AS {self.asns[v]}")
                if u in seen:
                    raise TopologyError(f"multiple edges between AS {self.asns[v]} and AS {self.asns[u]}")
                seen.add(u)
                back = {
                    Relationship.CUSTOMER: self.providers[u],
                    Relationship.PEER: self.peers[u],
                    Relationship.PROVIDER: self.customers[u],
                }[rel]
                if v not in back:
                    raise TopologyError(
                        f"asymmetric relationship between AS {self.asns[v]} and AS {self.asns[u]}")

    def content_hash(self) -> str:
        """SHA-256 over the canonical relationship text (ASN based)."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(self.to_text().encode())
            self._hash = h.hexdigest()
        return self._hash

    def to_text(self) -> str:
        asns = self.asns
        lines = sorted((asns[a], asns[b], c) for a, b, c in self.edges())
        isolated = [asns[v] for v in range(self.n) if self.degree(v) == 0]
        out = [f"{a}|{b}|{c}" for a, b, c in lines]
        out += [f"# isolated {a}" for a in isolated]
        return "\n".join(out) + "\n"

    def induced(self, keep: Iterable[int]) -> AsGraph:
        """Subgraph on the dense ids in ``keep``, renamed densely by ASN."""
        keep = set(keep)
        asns = self.asns
        p2c = [(asns[a], asns[b]) for a, b, c in self.edges() if c == P2C and a in keep and b in keep]
        p2p = [(asns[a], asns[b]) for a, b, c in self.edges() if c == P2P and a in keep and b in keep]
        return AsGraph.from_edges(p2c, p2p, asns=(asns[v] for v in keep))

    def without_edge(self, a: int, b: int) -> AsGraph:
        """Copy of the graph with the link between dense ids a and b removed."""
        if self.relationship(a, b) is None:
            raise TopologyError(f"AS {self.asns[a]} and AS {self.asns[b]} are not adjacent")
        drop = {a, b}

        def strip(lists, v):
            other = ({a, b} - {v}).pop() if v in drop else None
            return [x for x in lists[v] if x != other]

        return AsGraph(
            self.asns,
            [strip(self.customers, v) for v in range(self.n)],
            [strip(self.peers, v) for v in range(self.n)],
            [strip(self.providers, v) for v in range(self.n)],
        )


def _describe(rec) -> str:
    if rec[0] == "p2c":
        return f"{rec[1]} provider of {rec[2]}"
    return "peers"


def _iter_lines(data: Source) -> Iterator[str]:
    if isinstance(data, bytes):
        yield from data.decode("utf-8").splitlines()
    elif isinstance(data, os.PathLike):
        with open_text(data) as fh:
            yield from fh
    elif isinstance(data, str):
        yield from data.splitlines()
    else:
        for line in data:
            yield line.decode("utf-8") if isinstance(line, bytes) else line


def open_text(path) -> IO[str]:
    """Open a UTF-8 text file, transparently decompressing .bz2 and .gz."""
    path = os.fspath(path)
    if path.endswith(".bz2"):
        return io.TextIOWrapper(bz2.open(path, "rb"), encoding="utf-8")
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def parse_relationships(data: Source) -> AsGraph:
    """Parse ``asn1|asn2|code`` lines into a validated graph.

    Code -1 means asn1 is the provider of asn2, code 0 means the two are
    peers. Lines starting with ``#`` and blank lines are ignored; a trailing
    fourth field (as in serial-2 files) is tolerated.

    Raises:
        ParseError: malformed line, with its line number.
        RelationshipConflict: the same pair appears with two relationships.
    """
    p2c, p2p = [], []
    for lineno, raw in enumerate(_iter_lines(data), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _REL_LINE.match(line)
        if not match:
            raise ParseError(lineno, line, "expected asn1|asn2|rel")
        a, b, code = int(match[1]), int(match[2]), int(match[3])
        if a == b:
            raise ParseError(lineno, line, "self-loop")
        if code == P2C:
            p2c.append((a, b))
        elif code == P2P:
            p2p.append((a, b))
        else:
            raise ParseError(lineno, line, f"unknown relationship code {code}")
    graph = AsGraph.from_edges(p2c, p2p)
    graph.validate()
    return graph


def load_relationships(path) -> AsGraph:
    return parse_relationships(Path(path))


def read_asn_list(data: Source) -> list[int]:
    """Newline-delimited ASN list; ``#`` comments and blank lines ignored."""
    out = []
    for lineno, raw in enumerate(_iter_lines(data), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.isdigit():
            raise ParseError(lineno, line, "expected an AS number")
        out.append(int(line))
    return out


def preprocess(
    graph: AsGraph,
    tier1_seed: Iterable[int],
    min_degree: int = DEFAULT_MIN_DEGREE,
) -> AsGraph:
    """Prune provider-free, low-degree ASes to a fixed point and renumber.

    An AS is removed when it has no providers, its total degree is below
    ``min_degree`` and it is not in ``tier1_seed`` (original ASNs). Removal
    can strip other ASes of their last provider, so the rule is reapplied
    until nothing changes. Provider-free ASes at or above the degree cutoff
    survive and are logged.
    """
    seed = set(tier1_seed)
    if not seed:
        raise TopologyError("tier1_seed must be nonempty")
    missing = sorted(a for a in seed if not graph.has_asn(a))
    if missing:
        raise TopologyError(f"tier1 seed ASes missing from graph: {missing}")
    n = graph.n
    seed_ids = {graph.index(a) for a in seed}
    alive = bytearray([1]) * n
    n_prov = [len(p) for p in graph.providers]
    deg = [graph.degree(v) for v in range(n)]

    def removable(v):
        return alive[v] and n_prov[v] == 0 and deg[v] < min_degree and v not in seed_ids

    stack = [v for v in range(n) if removable(v)]
    while stack:
        v = stack.pop()
        if not removable(v):
            continue
        alive[v] = 0
        for u, rel in graph.neighbors(v):
            if not alive[u]:
                continue
            deg[u] -= 1
            if rel == Relationship.CUSTOMER:
                n_prov[u] -= 1
            if removable(u):
                stack.append(u)
    keep = [v for v in range(n) if alive[v]]
    out = graph.induced(keep)
    orphans = [out.asns[v] for v in range(out.n) if not out.providers[v] and out.asns[v] not in seed]
    logger.info("preprocess: kept %d of %d ASes", out.n, n)
    if orphans:
        logger.warning("preprocess: %d provider-free ASes outside the seed survive on degree: %s",
                       len(orphans), orphans[:10])
    return out


@dataclass(frozen=True)
class IxpMembership:
    """Deduplicated ``(ixp_id, asn)`` records."""

    records: tuple[tuple[str, int], ...] = ()

    @classmethod
    def parse(cls, data: Source) -> IxpMembership:
        seen = {}
        for lineno, raw in enumerate(_iter_lines(data), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or not parts[0] or not parts[1].isdigit():
                raise ParseError(lineno, line, "expected ixp_id,asn")
            seen.setdefault((parts[0], int(parts[1])), None)
        return cls(tuple(seen))

    def by_ixp(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for ixp, asn in self.records:
            out.setdefault(ixp, []).append(asn)
        return out


class IxpAugmentation(NamedTuple):
    graph: AsGraph
    added: int
    skipped: tuple[int, ...]


def augment_with_ixp(graph: AsGraph, memberships: IxpMembership) -> IxpAugmentation:
    """Add a peer edge between every non-adjacent pair sharing an IXP.

    Members whose ASN is not in the graph are skipped and reported.
    Existing edges are never changed.
    """
    skipped = sorted({asn for _, asn in memberships.records if not graph.has_asn(asn)})
    if skipped:
        logger.info("augment_with_ixp: skipped %d unresolvable members", len(skipped))
    extra = set()
    for members in memberships.by_ixp().values():
        ids = sorted({graph.index(a) for a in members if graph.has_asn(a)})
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if graph.relationship(a, b) is None:
                    extra.add((a, b))
    peers = [list(p) for p in graph.peers]
    for a, b in extra:
        peers[a].append(b)
        peers[b].append(a)
    out = AsGraph(graph.asns, graph.customers, peers, graph.providers)
    return IxpAugmentation(out, len(extra), tuple(skipped))


class Tier(Enum):
    TIER1 = "Tier1"
    TIER2 = "Tier2"
    TIER3 = "Tier3"
    CP = "CP"
    SMALL_CP = "SmallCP"
    STUB_X = "StubX"
    STUB = "Stub"
    SMDG = "SMDG"


STUB_TIERS = frozenset({Tier.STUB, Tier.STUB_X})


@dataclass(frozen=True)
class TierAssignment:
    tiers: tuple[Tier, ...]
    order: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, v: int) -> Tier:
        return self.tiers[v]

    def __len__(self) -> int:
        return len(self.tiers)

    def members(self, tier: Tier) -> list[int]:
        """Members of a tier. Ranked tiers come in ranking order, the rest by id."""
        if tier in self.order:
            return list(self.order[tier])
        return [v for v, t in enumerate(self.tiers) if t is tier]

    def counts(self) -> dict[Tier, int]:
        out = {t: 0 for t in Tier}
        for t in self.tiers:
            out[t] += 1
        return out

    def non_stubs(self) -> list[int]:
        return [v for v, t in enumerate(self.tiers) if t not in STUB_TIERS]


def classify_tiers(
    graph: AsGraph,
    cp_asns: Iterable[int] = DEFAULT_CP_ASNS,
    tier1_seed: Iterable[int] | None = None,
    *,
    n_tier1: int = 13,
    n_tier2: int = 100,
    n_tier3: int = 100,
    n_small_cp: int = 300,
) -> TierAssignment:
    """Assign every AS to exactly one tier.

    Rules are applied in order: Tier1 (seed list, otherwise the ``n_tier1``
    provider-free ASes with most customers), Tier2 and Tier3 (next ASes with
    providers by customer degree), CP (fixed list), SmallCP (top by peering
    degree), StubX (peers, no customers), Stub (no customers or peers), and
    SMDG for the rest. Degree ties are broken by lower ASN.
    """
    n = graph.n
    tiers: list[Tier | None] = [None] * n
    order: dict[Tier, list[int]] = {}
    ncust = [len(c) for c in graph.customers]

    def by_degree(cands, deg):
        return sorted(cands, key=lambda v: (-deg[v], graph.asns[v]))

    if tier1_seed is not None:
        seed = list(dict.fromkeys(tier1_seed))
        missing = [a for a in seed if not graph.has_asn(a)]
        if missing:
            raise TopologyError(f"tier1 seed ASes missing from graph: {missing}")
        t1 = by_degree([graph.index(a) for a in seed], ncust)
    else:
        t1 = by_degree([v for v in range(n) if not graph.providers[v]], ncust)[:n_tier1]
    for v in t1:
        tiers[v] = Tier.TIER1
    order[Tier.TIER1] = t1

    ranked = by_degree([v for v in range(n) if tiers[v] is None and graph.providers[v]], ncust)
    order[Tier.TIER2] = ranked[:n_tier2]
    order[Tier.TIER3] = ranked[n_tier2:n_tier2 + n_tier3]
    for tier in (Tier.TIER2, Tier.TIER3):
        for v in order[tier]:
            tiers[v] = tier

    cps = []
    absent = [a for a in cp_asns if not graph.has_asn(a)]
    if absent:
        logger.info("classify_tiers: %d CP ASes not in graph: %s", len(absent), absent)
    for asn in cp_asns:
        if not graph.has_asn(asn):
            continue
        v = graph.index(asn)
        if tiers[v] is None:
            tiers[v] = Tier.CP
            cps.append(v)
    order[Tier.CP] = cps

    npeer = [len(p) for p in graph.peers]
    small = by_degree([v for v in range(n) if tiers[v] is None], npeer)[:n_small_cp]
    for v in small:
        tiers[v] = Tier.SMALL_CP
    order[Tier.SMALL_CP] = small

    for v in range(n):
        if tiers[v] is not None:
            continue
        if graph.customers[v]:
            tiers[v] = Tier.SMDG
        elif graph.peers[v]:
            tiers[v] = Tier.STUB_X
        else:
            tiers[v] = Tier.STUB
    return TierAssignment(tuple(tiers), order)
