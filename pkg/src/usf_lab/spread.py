"""The spread <W>: minimum over trees on W of the product of <xy> over edges.

``spread`` runs Kruskal on the exact integer weights <xy>.  Since the product
is monotone in each factor, the minimum spanning tree for the integer weights
also minimises the product, so no floating point enters the choice of tree.
``spread_bruteforce`` is the independent oracle: it walks every labelled tree
through its Pruefer code.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lattice import as_point, rho, span_distance

DEFAULT_CAP = 64
BRUTEFORCE_CAP = 7


@dataclass(frozen=True)
class SpreadResult:
    points: tuple
    log_value: float
    witness_tree: tuple  # pairs (i, j) with i < j indexing ``points``
    exact_value: int

    @property
    def value(self) -> int:
        return self.exact_value


def _dedupe(W: Iterable[Sequence[int]]) -> tuple:
    seen = {}
    for p in W:
        seen.setdefault(as_point(p), None)
    pts = tuple(seen)
    if not pts:
        raise ValueError("spread of an empty set is undefined")
    d = len(pts[0])
    if any(len(p) != d for p in pts):
        raise ValueError("dimension mismatch inside W")
    return pts


def _result(pts: tuple, edges: list[tuple[int, int]]) -> SpreadResult:
    weights = [span_distance(pts[i], pts[j]) for i, j in edges]
    return SpreadResult(
        points=pts,
        log_value=math.fsum(math.log(w) for w in weights),
        witness_tree=tuple(edges),
        exact_value=math.prod(weights),
    )


def spread(W: Iterable[Sequence[int]], cap: int = DEFAULT_CAP) -> SpreadResult:
    pts = _dedupe(W)
    n = len(pts)
    if n > cap:
        raise ValueError(f"|W| = {n} exceeds the cap of {cap}")
    edges = sorted(
        (span_distance(pts[i], pts[j]), i, j) for i in range(n) for j in range(i + 1, n)
    )
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for _, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    tree.sort()
    return _result(pts, tree)


def prufer_to_edges(seq: Sequence[int], n: int) -> list[tuple[int, int]]:
    """Decode a Pruefer sequence of length n-2 into the tree's edge list."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(u for u in range(n) if degree[u] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (i for i in range(n) if degree[i] == 1)
    edges.append((u, w))
    return edges


def iter_labeled_trees(n: int):
    """All n**(n-2) labelled trees on {0..n-1} as edge lists."""
    if n == 1:
        yield []
        return
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield prufer_to_edges(seq, n)


def spread_bruteforce(W: Iterable[Sequence[int]]) -> SpreadResult:
    pts = _dedupe(W)
    n = len(pts)
    if n > BRUTEFORCE_CAP:
        raise ValueError(f"brute force refused for |W| = {n} > {BRUTEFORCE_CAP}")
    w = {(i, j): span_distance(pts[i], pts[j]) for i in range(n) for j in range(i + 1, n)}
    best = None
    best_edges: list = []
    for edges in iter_labeled_trees(n):
        val = math.prod(w[e] for e in edges)
        key = (val, sorted(edges))
        if best is None or key < best:
            best = key
            best_edges = sorted(edges)
    return _result(pts, best_edges)


def greedy_spread_proxy(xs: Sequence[Sequence[int]]) -> int:
    """prod_i rho(x_i, {x_{i+1}, ..., x_n}) for the given ordering."""
    xs = [as_point(x) for x in xs]
    if len(xs) < 2:
        raise ValueError("need at least two points")
    out = 1
    for i in range(len(xs) - 1):
        out *= rho([xs[i]], xs[i + 1:])
    return out


def spread_extension_bounds(W: Iterable[Sequence[int]], x: Sequence[int]) -> tuple[int, int]:
    """(<W x>, <W> * rho(x, W)); the first never exceeds the second."""
    pts = _dedupe(W)
    if len(pts) > BRUTEFORCE_CAP:
        raise ValueError(f"|W| = {len(pts)} exceeds {BRUTEFORCE_CAP}")
    x = as_point(x)
    lower = spread(pts + (x,)).exact_value
    upper = spread(pts).exact_value * rho([x], pts)
    return lower, upper
