"""Geometry of Z^d: the <xy> kernel, l1 balls, dyadic shells, wired boxes.

Points are plain tuples of ints.  Bulk point sets are ``(k, d)`` int64 arrays
in lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from math import comb
from typing import Iterable, Sequence

import numpy as np

Point = tuple

DEFAULT_MAX_VERTICES = 50_000_000


def as_point(p: Sequence[int]) -> tuple[int, ...]:
    t = tuple(int(c) for c in p)
    if not t:
        raise ValueError("a lattice point needs at least one coordinate")
    return t


def _check_dims(*pts: Sequence[int]) -> int:
    d = len(pts[0])
    for p in pts[1:]:
        if len(p) != d:
            raise ValueError(f"dimension mismatch: {len(p)} != {d}")
    return d


def span_distance(x: Sequence[int], y: Sequence[int]) -> int:
    """<xy> = 1 + |x - y|_1."""
    _check_dims(x, y)
    return 1 + sum(abs(int(a) - int(b)) for a, b in zip(x, y))


def rho(V: Iterable[Sequence[int]], W: Iterable[Sequence[int]]) -> int:
    """min <vw> over v in V, w in W (1 when the sets meet)."""
    V = [as_point(v) for v in V]
    W = [as_point(w) for w in W]
    if not V or not W:
        raise ValueError("rho needs two nonempty sets")
    _check_dims(V[0], *V[1:], *W)
    return min(span_distance(v, w) for v in V for w in W)


def l1_ball_size(d: int, r: int) -> int:
    """Number of v in Z^d with |v|_1 <= r."""
    if r < 0:
        return 0
    return sum(2**k * comb(d, k) * comb(r, k) for k in range(min(d, r) + 1))


def l1_ball_points(d: int, r: int) -> np.ndarray:
    """All v with |v|_1 <= r, lexicographically sorted, as a (k, d) array."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if r < 0:
        return np.zeros((0, d), dtype=np.int64)
    # build from the last coordinate forward; pts[s] = points of the
    # trailing block with l1 norm <= s
    last = [np.arange(-s, s + 1, dtype=np.int64)[:, None] for s in range(r + 1)]
    for _ in range(d - 1):
        nxt = []
        for s in range(r + 1):
            blocks = []
            for c in range(-s, s + 1):
                sub = last[s - abs(c)]
                head = np.full((sub.shape[0], 1), c, dtype=np.int64)
                blocks.append(np.hstack([head, sub]))
            nxt.append(np.vstack(blocks))
        last = nxt
    return last[r]


def l1_sphere_size(d: int, s: int) -> int:
    """Number of v in Z^d with |v|_1 = s."""
    return l1_ball_size(d, s) - l1_ball_size(d, s - 1)


def axis_convolution_sum(d: int, alpha: float, beta: float, t: int, radius: int) -> float:
    """Sum over |x|_1 < radius of <0x>^-alpha <xw>^-beta with w = (t - 1) e_1.

    Both factors depend on x only through x_1 and the l1 norm s of the other
    coordinates, so the sum runs over (x_1, s) weighted by sphere sizes.
    """
    if t < 1 or radius < 1:
        raise ValueError("need t >= 1 and radius >= 1")
    terms = []
    for x1 in range(-(radius - 1), radius):
        for s in range(radius - abs(x1)):
            mult = l1_sphere_size(d - 1, s) if d > 1 else int(s == 0)
            if mult:
                terms.append(mult * (1 + abs(x1) + s) ** -alpha
                             * (1 + abs(x1 - (t - 1)) + s) ** -beta)
    return math.fsum(terms)


@dataclass(frozen=True)
class Shell:
    """Dyadic shell H_n^N(v) = {x : 2^n <= <vx> < 2^N}."""

    center: tuple
    n: int
    N: int

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not 0 <= self.n < self.N:
            raise ValueError(f"shell needs 0 <= n < N, got n={self.n}, N={self.N}")

    @property
    def d(self) -> int:
        return len(self.center)

    def contains(self, x: Sequence[int]) -> bool:
        s = span_distance(self.center, x)
        return 2**self.n <= s < 2**self.N

    def radii(self) -> tuple[int, int]:
        """Inclusive range of |x - v|_1 covered by the shell."""
        return 2**self.n - 1, 2**self.N - 2


def shell_points(s: Shell, max_points: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    lo, hi = s.radii()
    need = l1_ball_size(s.d, hi)
    if need > max_points:
        raise MemoryError(f"shell enclosing ball has {need} points (cap {max_points})")
    ball = l1_ball_points(s.d, hi)
    norms = np.abs(ball).sum(axis=1)
    pts = ball[norms >= lo]
    return pts + np.asarray(s.center, dtype=np.int64)


@dataclass
class WiredBoxGraph:
    """B_R with the complement of the l1 ball collapsed to one vertex.

    ``neighbors[i]`` lists the 2d lattice neighbours of box vertex ``i`` in
    the order (+e_1, -e_1, +e_2, -e_2, ...); any neighbour outside the box is
    replaced by ``wired``, so parallel edges to the wired vertex keep their
    multiplicity.
    """

    d: int
    R: int
    coords: np.ndarray
    neighbors: np.ndarray
    _index: dict | None = field(default=None, repr=False)
    _keys: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_box(self) -> int:
        return self.coords.shape[0]

    @property
    def wired(self) -> int:
        return self.n_box

    @property
    def n_vertices(self) -> int:
        return self.n_box + 1

    def index_of(self, p: Sequence[int]) -> int:
        """Dense id of a box point; the wired id for anything outside."""
        p = as_point(p)
        if len(p) != self.d:
            raise ValueError(f"dimension mismatch: {len(p)} != {self.d}")
        if sum(abs(c) for c in p) >= self.R:
            return self.wired
        if self._keys is not None:
            k = _encode(np.asarray([p], dtype=np.int64), self.R)[0]
            return int(np.searchsorted(self._keys, k))
        return self._index[p]

    def point(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coords[i])

    def degree_sum(self) -> int:
        """Sum of degrees over all vertices, wired vertex included."""
        to_wired = int((self.neighbors == self.wired).sum())
        return int(self.neighbors.size) + to_wired

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) adjacency including the wired vertex's half-edges."""
        n = self.n_box
        deg = 2 * self.d
        rows, slots = np.nonzero(self.neighbors == self.wired)
        indptr = np.empty(n + 2, dtype=np.int64)
        indptr[: n + 1] = np.arange(n + 1, dtype=np.int64) * deg
        indptr[n + 1] = indptr[n] + rows.size
        indices = np.concatenate([self.neighbors.reshape(-1), rows.astype(np.int64)])
        return indptr, indices


def _encode(pts: np.ndarray, R: int) -> np.ndarray:
    base = 2 * R - 1
    keys = np.zeros(pts.shape[0], dtype=np.int64)
    for j in range(pts.shape[1]):
        keys = keys * base + (pts[:, j] + (R - 1))
    return keys


def wired_box(d: int, R: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> WiredBoxGraph:
    """Build B_R^W for B_R = {v : |v|_1 < R}."""
    if d < 1 or R < 1:
        raise ValueError(f"need d >= 1 and R >= 1, got d={d}, R={R}")
    n = l1_ball_size(d, R - 1)
    if n + 1 > max_vertices:
        raise MemoryError(f"wired box would have {n + 1} vertices (cap {max_vertices})")
    coords = l1_ball_points(d, R - 1)
    wired = n
    neighbors = np.empty((n, 2 * d), dtype=np.int64)
    encodable = (2 * R - 1) ** d < 2**62
    index = None
    keys = None
    if encodable:
        keys = _encode(coords, R)
    else:
        index = {tuple(map(int, c)): i for i, c in enumerate(coords)}
    norms = np.abs(coords).sum(axis=1)
    for ax in range(d):
        for sgn_slot, sgn in ((0, 1), (1, -1)):
            nb = coords.copy()
            nb[:, ax] += sgn
            inside = (norms + np.where(coords[:, ax] * sgn >= 0, 1, -1)) < R
            col = np.full(n, wired, dtype=np.int64)
            if encodable:
                col[inside] = np.searchsorted(keys, _encode(nb[inside], R))
            else:
                col[inside] = [index[tuple(map(int, c))] for c in nb[inside]]
            neighbors[:, 2 * ax + sgn_slot] = col
    return WiredBoxGraph(d=d, R=R, coords=coords, neighbors=neighbors, _index=index, _keys=keys)


def inner_ids(g: WiredBoxGraph, radius: int) -> np.ndarray:
    """Ids of box vertices with |v|_1 < radius."""
    return np.nonzero(np.abs(g.coords).sum(axis=1) < radius)[0]
