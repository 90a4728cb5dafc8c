"""Simple random walks, loop erasure, Green function and USF connection estimators.

The USF estimators follow Wilson's method rooted at infinity, truncated to an
l1 ball: the first point's walk runs until it leaves the ball and is loop
erased; each later walk runs until it hits what has been built so far or
leaves the ball.  Leaving the ball stands in for reaching infinity, so
connection probabilities are underestimated, never overestimated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _sites
from .lattice import as_point, span_distance
from .parallel import map_ranges
from .rng import MASK64, SplitMix64

DEFAULT_ESCAPE_FACTOR = 64


@dataclass
class WalkPath:
    points: np.ndarray  # (n, d)
    generator_seed: int
    truncated: bool = False

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class LoopErasedPath:
    points: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo mean with its standard error."""

    value: float
    stderr: float
    n: int
    successes: int = 0
    truncated: int = 0


def step_direction(gen: SplitMix64, d: int) -> tuple[int, int]:
    """(axis, +1/-1) for one step; same mapping as the compiled kernels."""
    k = gen.below(2 * d)
    return k >> 1, (-1 if k & 1 else 1)


def walk_until(start: Sequence[int], stop: Callable[[tuple], bool], max_steps: int,
               seed: int) -> WalkPath:
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    pos = list(as_point(start))
    d = len(pos)
    gen = SplitMix64(seed)
    pts = [tuple(pos)]
    truncated = False
    while not stop(tuple(pos)):
        if len(pts) - 1 >= max_steps:
            truncated = True
            break
        ax, s = step_direction(gen, d)
        pos[ax] += s
        pts.append(tuple(pos))
    return WalkPath(np.array(pts, dtype=np.int64).reshape(-1, d), seed, truncated)


def loop_erase(p: WalkPath | LoopErasedPath | np.ndarray) -> LoopErasedPath:
    """Chronological loop erasure; the first and last points are kept."""
    pts = p.points if hasattr(p, "points") else np.asarray(p)
    if pts.shape[0] == 0:
        raise ValueError("cannot loop-erase an empty path")
    stack: list[tuple] = []
    where: dict[tuple, int] = {}
    for row in pts:
        t = tuple(int(c) for c in row)
        i = where.get(t)
        if i is not None:
            for q in stack[i + 1:]:
                del where[q]
            del stack[i + 1:]
        else:
            where[t] = len(stack)
            stack.append(t)
    return LoopErasedPath(np.array(stack, dtype=np.int64).reshape(-1, pts.shape[1]))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return m, se


def _green_range(x, y, max_steps, seed, lo, hi):
    return _sites.green_batch(x, y, max_steps, np.uint64(seed & MASK64), lo, hi)


def estimate_green(x: Sequence[int], y: Sequence[int], trials: int, max_steps: int,
                   seed: int, workers: int | None = 1, first_trial: int = 0) -> Estimate:
    """Mean number of visits to y in steps 0..max_steps of a walk from x.

    Trial i (counted from ``first_trial``) uses stream ``derive_seed(seed, i)``.
    """
    x = np.array(as_point(x), dtype=np.int64)
    y = np.array(as_point(y), dtype=np.int64)
    if x.size != y.size:
        raise ValueError("dimension mismatch")
    if x.size <= 2:
        raise ValueError("the Green function diverges for d <= 2")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts = np.concatenate(map_ranges(_green_range, trials, workers, (x, y, max_steps, seed),
                                        offset=first_trial))
    m, se = _mean_se(counts.astype(float))
    return Estimate(m, se, trials)


# --------------------------------------------------------------- USF walks

def expected_exit_steps(d: int, radius: int) -> float:
    """Rough mean exit time of the l1 ball (l1 norm ~ sqrt(2 d n / pi))."""
    return math.pi * radius * radius / (2 * d)


class _Workspace:
    def __init__(self, d: int, radius: int, k: int):
        self.d = d
        cap = max(1024, int(2.5 * expected_exit_steps(d, radius)))
        self.alloc(cap, k)

    def alloc(self, cap: int, k: int):
        self.struct = _sites.new_table(cap * max(1, k - 1) // 2 + 1024, self.d)
        self.scratch = _sites.new_table(cap, self.d)
        self.stack = np.zeros((self.scratch.shape[0], _sites.key_words(self.d)), dtype=np.uint64)
        self.gens = np.ones(2, dtype=np.uint64)

    def grow(self, k: int):
        self.alloc(self.scratch.shape[0] * 2, k)


def _sequence_range(rel, radius, max_steps, seed, stop_on_split, lo, hi):
    k, d = rel.shape
    ws = _Workspace(d, radius, k)
    outs, flags = [], []
    i = lo
    while i < hi:
        out, fl, done = _sites.wilson_sequence_batch(
            rel, radius, max_steps, np.uint64(seed & MASK64), i, hi, ws.struct, ws.scratch, ws.stack,
            ws.gens, stop_on_split)
        outs.append(out[: done - i])
        flags.append(fl[: done - i])
        if done < hi:
            ws.grow(k)
        i = done
    return np.concatenate(outs), np.concatenate(flags)


def ball_radius(points: Sequence[Sequence[int]], escape_radius_factor: float) -> int:
    diam = max(span_distance(a, b) for a in points for b in points)
    return int(math.ceil(escape_radius_factor * diam))


def sequence_components(points: Sequence[Sequence[int]], trials: int,
                        escape_radius_factor: float = DEFAULT_ESCAPE_FACTOR,
                        max_steps: int | None = None, seed: int = 0,
                        workers: int | None = 1, stop_on_split: bool = True,
                        radius: int | None = None,
                        first_trial: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial component ids of ``points`` under the truncated sequential construction.

    The ball is centred at the first point with radius
    ``escape_radius_factor`` times the largest pairwise <ab> unless ``radius``
    is given.  Returns (components (trials, k), status flags (trials,)).
    """
    pts = [as_point(p) for p in points]
    d = len(pts[0])
    if radius is None:
        radius = ball_radius(pts, escape_radius_factor)
    if radius > _sites.MAX_RADIUS:
        raise ValueError(f"ball radius {radius} exceeds {_sites.MAX_RADIUS}")
    if max_steps is None:
        max_steps = 10 * radius * radius
    rel = np.array(pts, dtype=np.int64) - np.array(pts[0], dtype=np.int64)
    parts = map_ranges(_sequence_range, trials, workers,
                       (rel, radius, max_steps, seed, stop_on_split), offset=first_trial)
    comps = np.concatenate([p[0] for p in parts])
    flags = np.concatenate([p[1] for p in parts])
    return comps, flags


def _bernoulli(success: np.ndarray, flags: np.ndarray) -> Estimate:
    n = success.size
    s = int(success.sum())
    p = s / n
    se = math.sqrt(p * (1 - p) / n) if n else float("nan")
    return Estimate(p, se, n, s, int((flags == _sites.TRUNCATED).sum()))


def usf_connect_prob(x: Sequence[int], z: Sequence[int], trials: int,
                     escape_radius_factor: float = DEFAULT_ESCAPE_FACTOR,
                     max_steps: int | None = None, seed: int = 0,
                     workers: int | None = 1, first_trial: int = 0) -> Estimate:
    """P[the walk from z hits the loop erasure of the walk from x], ball-truncated."""
    x, z = as_point(x), as_point(z)
    if len(x) != len(z):
        raise ValueError("dimension mismatch")
    if x == z:
        raise ValueError("x and z must differ")
    if len(x) < 5:
        raise ValueError("the USF connection estimator needs d >= 5")
    comps, flags = sequence_components([x, z], trials, escape_radius_factor, max_steps,
                                       seed, workers, first_trial=first_trial)
    return _bernoulli(comps[:, 1] == 0, flags)


def usf_same_tree_prob(W: Sequence[Sequence[int]], trials: int,
                       escape_radius_factor: float = DEFAULT_ESCAPE_FACTOR,
                       max_steps: int | None = None, seed: int = 0,
                       workers: int | None = 1, first_trial: int = 0) -> Estimate:
    """P[all of W lie in the component of its first point], ball-truncated."""
    pts = list(dict.fromkeys(as_point(w) for w in W))
    if len(pts) < 2:
        raise ValueError("need at least two distinct points")
    if len(pts) > 5:
        raise ValueError("at most five points are supported")
    if len(pts[0]) < 5:
        raise ValueError("the USF estimator needs d >= 5")
    comps, flags = sequence_components(pts, trials, escape_radius_factor, max_steps,
                                       seed, workers, first_trial=first_trial)
    return _bernoulli((comps == 0).all(axis=1), flags)
