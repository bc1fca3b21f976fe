"""Fan-out over destinations with an ordered reduction.

Workers receive the graph once through the pool initializer. Results come
back in destination order whatever the number of workers, and callers only
merge integer counts or exact fractions, so output never depends on
scheduling.
"""

from __future__ import annotations

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor

_GRAPH = None


def _init(graph):
    global _GRAPH
    _GRAPH = graph


def _call(payload):
    fn, d, args = payload
    return fn(_GRAPH, d, *args)


def map_destinations(graph, destinations: Sequence[int], fn: Callable, args: tuple = (),
                     jobs: int = 1) -> list:
    """``[fn(graph, d, *args) for d in destinations]``, optionally in parallel."""
    destinations = list(destinations)
    if jobs is None or jobs <= 0:
        jobs = os.cpu_count() or 1
    if jobs == 1 or len(destinations) <= 1:
        return [fn(graph, d, *args) for d in destinations]
    jobs = min(jobs, len(destinations))
    chunk = max(1, len(destinations) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init, initargs=(graph,)) as pool:
        return list(pool.map(_call, [(fn, d, args) for d in destinations], chunksize=chunk))
