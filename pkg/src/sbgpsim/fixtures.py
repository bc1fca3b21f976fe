"""Small topologies shipped with the package, with their scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .policy import PolicyModel, SecurityRank
from .topology import AsGraph, parse_relationships

FIRST = PolicyModel(SecurityRank.FIRST)
SECOND = PolicyModel(SecurityRank.SECOND)

# set-cover instance encoded by setcover.txt: 3 elements, cover size 2
COVER_SUBSETS = ((0, 1), (1, 2), (2,))
COVER_GAMMA = 2


@dataclass(frozen=True)
class Fixture:
    """Topology plus ASNs of the scenario it illustrates."""

    name: str
    graph: AsGraph
    destination: int
    attacker: int | None = None
    secure: frozenset = frozenset()
    models: dict = field(default_factory=dict)

    def idx(self, asn: int) -> int:
        return self.graph.index(asn)

    @property
    def d(self) -> int:
        return self.idx(self.destination)

    @property
    def m(self) -> int | None:
        return None if self.attacker is None else self.idx(self.attacker)

    @property
    def S(self) -> frozenset:
        return frozenset(self.idx(a) for a in self.secure)

    def per_as_models(self, default: PolicyModel) -> list[PolicyModel]:
        out = [default] * self.graph.n
        for asn, model in self.models.items():
            out[self.idx(asn)] = model
        return out


def fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath("data", f"{name}.txt").read_text()


def load_fixture(name: str) -> Fixture:
    """One of ``wedgie``, ``downgrade``, ``collateral_first``, ``collateral_second``, ``setcover``."""
    if name not in _SCENARIOS:
        raise KeyError(f"unknown fixture {name!r}; expected one of {sorted(_SCENARIOS)}")
    graph = parse_relationships(fixture_text(name))
    return Fixture(name, graph, **_SCENARIOS[name])


_SCENARIOS = {
    "wedgie": dict(destination=3, secure=frozenset({3, 31027, 29518, 31283}),
                 models={31283: FIRST, 29518: SECOND}),
    "downgrade": dict(destination=3356, attacker=666, secure=frozenset({3356, 21740})),
    "collateral_first": dict(destination=64496, attacker=64511, secure=frozenset({64496, 7473, 7474})),
    "collateral_second": dict(destination=40426, attacker=64511,
                 secure=frozenset({40426, 174, 3491, 64497, 64498, 5617})),
    "setcover": dict(destination=1, attacker=2),
}

FIXTURES = tuple(_SCENARIOS)
