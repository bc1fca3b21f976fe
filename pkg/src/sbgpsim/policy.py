"""Route ranking under the insecure policy and the three security models."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .topology import Relationship

CUSTOMER = int(Relationship.CUSTOMER)
PEER = int(Relationship.PEER)
PROVIDER = int(Relationship.PROVIDER)


class SecurityRank(Enum):
    INSECURE = "insecure"
    FIRST = "first"
    SECOND = "second"
    THIRD = "third"


@dataclass(frozen=True)
class PolicyModel:
    """Security placement plus local-preference variant.

    ``lpk=None`` is the standard customer > peer > provider preference.
    ``lpk=k`` ranks customer and peer routes of length at most k by length
    first (customer before peer at equal length), then longer customer
    routes, longer peer routes, and provider routes last.
    """

    security: SecurityRank = SecurityRank.THIRD
    lpk: int | None = None

    def __post_init__(self):
        if not isinstance(self.security, SecurityRank):
            object.__setattr__(self, "security", SecurityRank(self.security))
        if self.lpk is not None and self.lpk < 1:
            raise ValueError("lpk must be a positive integer")

    @property
    def uses_security(self) -> bool:
        return self.security is not SecurityRank.INSECURE

    def label(self) -> str:
        name = self.security.value
        return name if self.lpk is None else f"{name}-lp{self.lpk}"

    def lp_class(self, rel: int, length: int) -> tuple:
        """Local-preference class of a route; smaller is better."""
        if self.lpk is None:
            return (rel,)
        if rel == PROVIDER:
            return (3,)
        if length <= self.lpk:
            return (0, length, rel)
        return (1,) if rel == CUSTOMER else (2,)

    def rank(self, rel: int, length: int, secure: bool) -> tuple:
        """Sort key of a route for one AS: smaller keys are preferred.

        ``secure`` must already reflect whether the selecting AS cares
        about security (it is in the secure set and not a simplex stub).
        """
        lp = self.lp_class(rel, length)
        insecure = 0 if secure and self.uses_security else 1
        if self.security is SecurityRank.FIRST:
            return (insecure, lp, length)
        if self.security is SecurityRank.SECOND:
            return (lp, insecure, length)
        return (lp, length, insecure)


class KeyEncoder:
    """Integer encoding of :meth:`PolicyModel.rank` for the hot loop.

    Order-isomorphic to the tuple ranks for path lengths below ``max_len``.
    """

    __slots__ = ("model", "max_len", "k", "n_classes", "mode")

    def __init__(self, model: PolicyModel, max_len: int):
        self.model = model
        self.max_len = max_len + 1
        if model.lpk is None:
            self.k = None
            self.n_classes = 3
        else:
            self.k = min(model.lpk, max_len)
            self.n_classes = 2 * self.k + 3
        self.mode = {SecurityRank.FIRST: 1, SecurityRank.SECOND: 2}.get(model.security, 3)

    def lp_index(self, rel: int, length: int) -> int:
        k = self.k
        if k is None:
            return rel
        if rel == PROVIDER:
            return 2 * k + 2
        if length <= k:
            return 2 * (length - 1) + rel
        return 2 * k + rel

    def encode(self, rel: int, length: int, secure: bool) -> int:
        cls = self.lp_index(rel, length)
        insecure = 0 if secure and self.model.uses_security else 1
        L = self.max_len
        if self.mode == 3:
            return (cls * L + length) * 2 + insecure
        if self.mode == 2:
            return (cls * 2 + insecure) * L + length
        return (insecure * self.n_classes + cls) * L + length


_BASE = {CUSTOMER: "CR", PEER: "PeeR", PROVIDER: "PrvR"}


def stage_name(model: PolicyModel, rel: int, secure: bool) -> str:
    """Fix-Routes subroutine that fixes a route of this type and security."""
    sec = model.security
    if secure and (sec is SecurityRank.FIRST or (sec is SecurityRank.SECOND and rel != PEER)):
        return "FS" + _BASE[rel]
    return "F" + _BASE[rel]


def stage_schedule(model: PolicyModel) -> list[str]:
    """Ordered Fix-Routes subroutines for a model."""
    if model.security is SecurityRank.SECOND:
        return ["FSCR", "FCR", "FPeeR", "FSPrvR", "FPrvR"]
    if model.security is SecurityRank.FIRST:
        return ["FSCR", "FSPeeR", "FSPrvR", "FCR", "FPeeR", "FPrvR"]
    return ["FCR", "FPeeR", "FPrvR"]


MODELS = {r.value: PolicyModel(r) for r in SecurityRank}
