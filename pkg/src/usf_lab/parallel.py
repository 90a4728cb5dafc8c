"""Trial-index work splitting.

Work is cut into contiguous index ranges; each range is a pure function of
(arguments, lo, hi), and results are concatenated in index order, so output
never depends on the worker count or on scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

ENV_WORKERS = "USF_LAB_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def index_ranges(n: int, pieces: int) -> list[tuple[int, int]]:
    pieces = max(1, min(pieces, n)) if n else 1
    edges = np.linspace(0, n, pieces + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def map_ranges(fn: Callable, n: int, workers: int | None = None, args: tuple = (),
               pieces_per_worker: int = 4, offset: int = 0) -> list:
    """Call ``fn(*args, lo, hi)`` over a partition of range(offset, offset + n).

    Results come back in index order.
    """
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or n < 2:
        return [fn(*args, offset, offset + n)]
    ranges = [(lo + offset, hi + offset) for lo, hi in index_ranges(n, workers * pieces_per_worker)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]
