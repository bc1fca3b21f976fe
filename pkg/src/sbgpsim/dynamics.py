"""Asynchronous best-response dynamics over explicit AS paths.

This is deliberately a different algorithm from the engine: ASes hold
concrete paths, re-select from their neighbors' current paths one at a
time, and the run stops at a fixed point or at the first repeated state.
It works for any mix of per-AS policy models.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Mapping, Sequence

from .policy import CUSTOMER, PEER, PROVIDER, PolicyModel
from .topology import AsGraph


def seeded_order(n: int, seed: int) -> list[int]:
    order = list(range(n))
    random.Random(seed).shuffle(order)
    return order


class Dynamics:
    """Best-response machinery for one scenario.

    Args:
        per_as_model: a single model, a sequence indexed by AS, or a mapping.
        tiebreak: optional ``f(v, candidates) -> u`` choosing among tied
            next hops; default is the lowest id.
    """

    def __init__(self, graph: AsGraph, scenario, per_as_model, tiebreak: Callable | None = None):
        self.graph = graph
        self.scenario = scenario
        n = graph.n
        if isinstance(per_as_model, PolicyModel):
            models = [per_as_model] * n
        elif isinstance(per_as_model, Mapping):
            models = [per_as_model[v] for v in range(n)]
        else:
            models = list(per_as_model)
        if len(models) != n:
            raise ValueError("per_as_model must cover every AS")
        self.models = models
        self.tiebreak = tiebreak
        self.d = scenario.destination
        self.m = scenario.attacker
        S = scenario.secure_set
        # an AS cares about security if it is secure and its model ranks security
        self.cares = [v in S and models[v].uses_security for v in range(n)]
        self.signs = [v in S for v in range(n)]
        self.dest_ok = self.d in S or self.d in scenario.simplex_stubs
        rel = [dict() for _ in range(n)]
        for v in range(n):
            for u in graph.customers[v]:
                rel[v][u] = CUSTOMER
            for u in graph.peers[v]:
                rel[v][u] = PEER
            for u in graph.providers[v]:
                rel[v][u] = PROVIDER
        self.rel = rel

    def origin_paths(self) -> list:
        paths: list = [None] * self.graph.n
        paths[self.d] = (self.d,)
        if self.m is not None:
            paths[self.m] = (self.m, self.d)
        return paths

    def path_secure(self, path: Sequence[int]) -> bool:
        """Whether a path (from its first AS to the destination) is signed end to end."""
        if self.m is not None and self.m in path:
            return False
        if not self.dest_ok:
            return False
        signs = self.signs
        return all(signs[x] for x in path[:-1])

    def exports(self, u: int, v: int, path: Sequence[int]) -> bool:
        """Whether ``u`` announces its current ``path`` to neighbor ``v``."""
        if u == self.d or u == self.m:
            return True
        if self.rel[u].get(path[1]) == CUSTOMER:
            return True
        return self.rel[u][v] == CUSTOMER

    def candidates(self, v: int, paths: Sequence) -> list[tuple[tuple, int, tuple]]:
        """All (rank, next hop, path) options of ``v`` given neighbors' paths."""
        model = self.models[v]
        cares = self.cares[v]
        out = []
        for u, rel in self.rel[v].items():
            p = paths[u]
            if p is None or v in p:
                continue
            if not self.exports(u, v, p):
                continue
            sec = cares and self.path_secure(p)
            # the attacker's announcement already counts the phantom hop
            length = len(p)
            out.append((model.rank(rel, length, sec), u, (v,) + tuple(p)))
        return out

    def best_response(self, v: int, paths: Sequence) -> tuple[tuple | None, tuple[int, ...]]:
        """Chosen path and the full tie set of next hops for ``v``."""
        cands = self.candidates(v, paths)
        if not cands:
            return None, ()
        best = min(c[0] for c in cands)
        ties = sorted(c[1] for c in cands if c[0] == best)
        if self.tiebreak is None or len(ties) == 1:
            pick = ties[0]
        else:
            pick = self.tiebreak(v, ties)
        for rank, u, p in cands:
            if u == pick and rank == best:
                return p, tuple(ties)
        raise AssertionError("tiebreak returned a non-candidate")

    def run(self, order: Sequence[int], initial: Sequence | None = None,
            max_rounds: int | None = None) -> tuple[list, bool, int]:
        """Round-robin activation in ``order`` until stable or cycling.

        Returns (paths, converged, rounds). The cap defaults to 10 * |V|
        rounds.
        """
        n = self.graph.n
        if max_rounds is None:
            max_rounds = 10 * max(n, 1)
        if initial is None:
            paths = self.origin_paths()
        else:
            paths = list(initial)
            for v, p in enumerate(self.origin_paths()):
                if p is not None:
                    paths[v] = p
        fixed = {self.d, self.m}
        active = [v for v in order if v not in fixed]
        seen = {tuple(paths)}
        for rnd in range(1, max_rounds + 1):
            changed = False
            for v in active:
                new, _ = self.best_response(v, paths)
                if new != paths[v]:
                    paths[v] = new
                    changed = True
            if not changed:
                return paths, True, rnd
            state = tuple(paths)
            if state in seen:
                return paths, False, rnd
            seen.add(state)
        return paths, False, max_rounds

    def is_stable(self, paths: Sequence) -> bool:
        fixed = {self.d, self.m}
        return all(v in fixed or self.best_response(v, paths)[0] == paths[v]
                   for v in range(self.graph.n))
