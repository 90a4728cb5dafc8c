"""Uniform spanning trees by Wilson's algorithm and the wired-box forest F*.

Kernels work on CSR adjacency (``indptr``, ``indices``) where a vertex with a
parallel edge lists that neighbour once per edge, so a uniform pick over the
slot range is a simple random walk step.
"""
from __future__ import annotations

import csv
import itertools
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .lattice import WiredBoxGraph, inner_ids, wired_box
from .rng import MASK64, derive_seed, nb_below, nb_next

NONE = -1
DEFAULT_STEP_CAP = 10**10
_MAGIC = b"USFF"
_HEADER = struct.Struct("<4sIIIQQ")  # magic, version, d, R, seed, n_vertices


@dataclass
class FiniteGraph:
    """Undirected multigraph on vertices 0..n-1 stored as CSR half-edges."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]]) -> "FiniteGraph":
        if n < 1:
            raise ValueError("graph has no vertices")
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in adj])
        indices = np.array([v for a in adj for v in a], dtype=np.int64)
        return cls(n, indptr, indices)

    @classmethod
    def from_box(cls, g: WiredBoxGraph) -> "FiniteGraph":
        indptr, indices = g.csr()
        return cls(g.n_vertices, indptr, indices)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edge list with multiplicity, each edge once as (u, v), u <= v."""
        out = []
        for u in range(self.n):
            for v in self.indices[self.indptr[u]:self.indptr[u + 1]]:
                if u < v:
                    out.append((u, int(v)))
                elif u == v:
                    raise ValueError("self-loops are not supported")
        return out

    def is_connected(self) -> bool:
        return _component_count_csr(self.indptr, self.indices) == 1


def cycle_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(n, list(itertools.combinations(range(n), 2)))


def grid_graph(rows: int, cols: int) -> FiniteGraph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return FiniteGraph.from_edges(rows * cols, edges)


@dataclass
class OrientedForest:
    """Parent pointers; ``NONE`` marks the root (UST) or a cut edge (F*)."""

    parent: np.ndarray
    root: int
    kind: str  # "ust" or "usf"
    seed: int = 0
    graph: WiredBoxGraph | FiniteGraph | None = None

    def edges(self) -> list[tuple[int, int]]:
        return [(v, int(p)) for v, p in enumerate(self.parent) if p != NONE]

    def edge_set(self) -> frozenset:
        return frozenset((min(a, b), max(a, b)) for a, b in self.edges())


@dataclass
class ComponentLabeling:
    label: np.ndarray
    count: int

    def same(self, x: int, y: int) -> bool:
        return self.label[x] == self.label[y]


# ----------------------------------------------------------------- kernels

@njit(cache=True)
def _component_count_csr(indptr, indices):
    n = indptr.size - 1
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    count = 0
    for s in range(n):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        top = 0
        stack[0] = s
        top = 1
        while top > 0:
            top -= 1
            u = stack[top]
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if not seen[v]:
                    seen[v] = True
                    stack[top] = v
                    top += 1
    return count


@njit(cache=True)
def _wilson_kernel(indptr, indices, root, seed, step_cap):
    n = indptr.size - 1
    in_tree = np.zeros(n, dtype=np.bool_)
    nxt = np.full(n, -1, dtype=np.int64)
    in_tree[root] = True
    state = np.uint64(seed)
    steps = 0
    for i in range(n):
        u = i
        while not in_tree[u]:
            state, r = nb_next(state)
            lo = indptr[u]
            nxt[u] = indices[lo + nb_below(r, indptr[u + 1] - lo)]
            u = nxt[u]
            steps += 1
            if steps > step_cap:
                return nxt, False
        u = i
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    nxt[root] = -1
    return nxt, True


@njit(cache=True)
def _uf_find(uf, a):
    r = a
    while uf[r] != r:
        r = uf[r]
    while uf[a] != r:
        nx = uf[a]
        uf[a] = r
        a = nx
    return r


@njit(cache=True)
def _labels_union_find(parent):
    n = parent.size
    uf = np.arange(n)
    for v in range(n):
        p = parent[v]
        if p >= 0:
            a = _uf_find(uf, v)
            b = _uf_find(uf, p)
            if a != b:
                uf[a] = b
    label = np.full(n, -1, dtype=np.int64)
    remap = np.full(n, -1, dtype=np.int64)
    count = 0
    for v in range(n):
        r = _uf_find(uf, v)
        if remap[r] < 0:
            remap[r] = count
            count += 1
        label[v] = remap[r]
    return label, count


@njit(cache=True)
def _labels_flood(parent, neighbors, wired):
    n = parent.size
    label = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    count = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = count
        stack[0] = s
        top = 1
        while top > 0:
            top -= 1
            u = stack[top]
            for k in range(neighbors.shape[1]):
                v = neighbors[u, k]
                if v == wired or label[v] >= 0:
                    continue
                if parent[u] == v or parent[v] == u:
                    label[v] = count
                    stack[top] = v
                    top += 1
        count += 1
    return label, count


@njit(cache=True)
def _zero_one_bfs(parent, neighbors, wired, src):
    n = parent.size
    inf = np.iinfo(np.int64).max
    dist = np.full(n, inf, dtype=np.int64)
    cap = 2 * (n * neighbors.shape[1] + 2)
    dq = np.empty(cap, dtype=np.int64)
    head = cap // 2
    tail = head
    dist[src] = 0
    dq[tail] = src
    tail += 1
    while head < tail:
        u = dq[head]
        head += 1
        du = dist[u]
        for k in range(neighbors.shape[1]):
            v = neighbors[u, k]
            if v == wired:
                continue
            w = 0 if (parent[u] == v or parent[v] == u) else 1
            if du + w < dist[v]:
                dist[v] = du + w
                if w == 0:
                    head -= 1
                    dq[head] = v
                else:
                    dq[tail] = v
                    tail += 1
    return dist


# ------------------------------------------------------------- public API

def wilson_ust(g: FiniteGraph | WiredBoxGraph, root: int, seed: int,
               step_cap: int = DEFAULT_STEP_CAP) -> OrientedForest:
    """Uniform spanning tree of ``g`` oriented toward ``root``."""
    box = g if isinstance(g, WiredBoxGraph) else None
    fg = FiniteGraph.from_box(g) if box is not None else g
    if not 0 <= root < fg.n:
        raise ValueError(f"root {root} out of range")
    if box is None and not fg.is_connected():
        raise ValueError("graph is disconnected; no spanning tree exists")
    parent, ok = _wilson_kernel(fg.indptr, fg.indices, root, np.uint64(seed & MASK64), step_cap)
    if not ok:
        raise RuntimeError(f"walk exceeded the step cap {step_cap}; graph disconnected?")
    return OrientedForest(parent=parent, root=root, kind="ust", seed=seed, graph=g)


def count_spanning_trees(g: FiniteGraph) -> int:
    """Matrix-tree theorem: exact determinant of a Laplacian cofactor (Bareiss)."""
    n = g.n
    if n < 1:
        raise ValueError("empty graph")
    if n == 1:
        return 1
    lap = [[0] * n for _ in range(n)]
    for u in range(n):
        for v in g.indices[g.indptr[u]:g.indptr[u + 1]]:
            lap[u][int(v)] -= 1
            lap[u][u] += 1
    m = [row[1:] for row in lap[1:]]
    size = n - 1
    sign = 1
    prev = 1
    for k in range(size - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, size) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[size - 1][size - 1]


def enumerate_spanning_trees(g: FiniteGraph) -> list[frozenset]:
    """Every spanning tree as a frozenset of (u, v) edges; for tiny graphs only."""
    edges = g.edges()
    if len(set(edges)) != len(edges):
        raise ValueError("enumeration needs a simple graph")
    out = []
    for sub in itertools.combinations(edges, g.n - 1):
        sub_g = FiniteGraph.from_edges(g.n, sub)
        if sub_g.is_connected():
            out.append(frozenset(sub))
    return out


def sample_usf_box(d: int, R: int, seed: int, graph: WiredBoxGraph | None = None
                   ) -> tuple[OrientedForest, ComponentLabeling]:
    """F* = UST of B_R^W rooted at the wired vertex, minus edges into it."""
    g = graph if graph is not None else wired_box(d, R)
    ust = wilson_ust(g, g.wired, seed)
    parent = ust.parent[: g.n_box].copy()
    parent[parent == g.wired] = NONE
    label, count = _labels_union_find(parent)
    forest = OrientedForest(parent=parent, root=g.wired, kind="usf", seed=seed, graph=g)
    return forest, ComponentLabeling(label, count)


def flood_fill_labels(f: OrientedForest) -> ComponentLabeling:
    """Independent BFS labelling of F* used to cross-check union-find."""
    g = f.graph
    label, count = _labels_flood(f.parent, g.neighbors, g.wired)
    return ComponentLabeling(label, count)


def n_values_from(f: OrientedForest, x: int) -> np.ndarray:
    """N(x, .) for every box vertex: fewest non-forest edges on a box path."""
    g = f.graph
    return _zero_one_bfs(f.parent, g.neighbors, g.wired, x)


def n_value(f: OrientedForest, labels: ComponentLabeling, x: int, y: int) -> int:
    g = f.graph
    for v in (x, y):
        if not 0 <= v < g.n_box:
            raise ValueError(f"vertex {v} is not a box vertex")
    if labels.label[x] == labels.label[y]:
        return 0
    dist = n_values_from(f, x)
    return int(dist[y])


def _component_mask(labels: np.ndarray, comps: np.ndarray) -> np.ndarray:
    return np.isin(labels, comps)


def domination_chains(F: ComponentLabeling, Fs: Sequence[ComponentLabeling],
                      g: WiredBoxGraph, v0: int) -> tuple[list[int], list[int]]:
    """Sizes of the chains C_j (one forest) and Q_j (independent forests)."""
    m = len(Fs) - 1
    sizes_c = []
    comps = np.array([F.label[v0]])
    mask = _component_mask(F.label, comps)
    sizes_c.append(int(mask.sum()))
    for _ in range(m):
        nb = g.neighbors[mask].ravel()
        nb = nb[nb != g.wired]
        comps = np.union1d(comps, np.unique(F.label[nb]))
        mask = _component_mask(F.label, comps)
        sizes_c.append(int(mask.sum()))
    sizes_q = []
    mask = _component_mask(Fs[0].label, np.array([Fs[0].label[v0]]))
    sizes_q.append(int(mask.sum()))
    for j in range(1, m + 1):
        comps = np.unique(Fs[j].label[mask])
        mask = _component_mask(Fs[j].label, comps)
        sizes_q.append(int(mask.sum()))
    return sizes_c, sizes_q


def domination_growth(d: int, R: int, m: int, v0: int | None, seed: int,
                      graph: WiredBoxGraph | None = None) -> tuple[list[int], list[int]]:
    """Forest F uses stream 0, forests F_0..F_m use streams 1..m+1."""
    if m < 0:
        raise ValueError("m must be >= 0")
    g = graph if graph is not None else wired_box(d, R)
    if v0 is None:
        v0 = g.index_of((0,) * d)
    _, F = sample_usf_box(d, R, derive_seed(seed, 0), graph=g)
    Fs = [sample_usf_box(d, R, derive_seed(seed, j + 1), graph=g)[1] for j in range(m + 1)]
    return domination_chains(F, Fs, g, v0)


def inner_box_ids(g: WiredBoxGraph, fraction: float = 0.5) -> np.ndarray:
    return inner_ids(g, max(1, int(g.R * fraction)))


# ------------------------------------------------------------ serialisation

def write_forest(f: OrientedForest, path, version: int = 1) -> None:
    """Flat binary layout: header (magic, version, d, R, seed, n) then int64 parents."""
    g = f.graph
    if not isinstance(g, WiredBoxGraph):
        raise TypeError("binary layout is defined for wired-box forests")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, version, g.d, g.R, f.seed & (2**64 - 1), f.parent.size))
        fh.write(np.ascontiguousarray(f.parent, dtype="<i8").tobytes())


def read_forest(path) -> OrientedForest:
    with open(path, "rb") as fh:
        magic, _version, d, R, seed, n = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a forest file")
        parent = np.frombuffer(fh.read(8 * n), dtype="<i8").astype(np.int64)
    g = wired_box(d, R)
    if parent.size not in (g.n_box, g.n_vertices):
        raise ValueError(f"{path}: parent array length {parent.size} does not match the box")
    kind = "usf" if parent.size == g.n_box else "ust"
    return OrientedForest(parent=parent, root=g.wired, kind=kind, seed=seed, graph=g)


def write_forest_csv(f: OrientedForest, path) -> None:
    g = f.graph
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["child", "parent", "child_coords", "parent_coords"])
        for v, p in f.edges():
            pc = "wired" if p == g.wired else " ".join(map(str, g.point(p)))
            w.writerow([v, p, " ".join(map(str, g.point(v))), pc])
