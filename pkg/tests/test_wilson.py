import itertools
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from usf_lab.lattice import wired_box
from usf_lab.rng import derive_seed
from usf_lab.wilson import (NONE, ComponentLabeling, FiniteGraph, OrientedForest,
                            complete_graph, count_spanning_trees, cycle_graph,
                            domination_chains, domination_growth, enumerate_spanning_trees,
                            flood_fill_labels, grid_graph, n_value, n_values_from,
                            read_forest, sample_usf_box, wilson_ust, write_forest,
                            write_forest_csv)


def det_oracle(g):
    L = np.zeros((g.n, g.n))
    for u, v in g.edges():
        L[u, u] += 1
        L[v, v] += 1
        L[u, v] -= 1
        L[v, u] -= 1
    return round(np.linalg.det(L[1:, 1:]))


def assert_spanning_tree(f, g):
    adj = {u: set(g.indices[g.indptr[u]:g.indptr[u + 1]].tolist()) for u in range(g.n)}
    assert f.parent[f.root] == NONE
    for v in range(g.n):
        if v != f.root:
            assert int(f.parent[v]) in adj[v]
        seen, u = set(), v
        while u != f.root:
            assert u not in seen
            seen.add(u)
            u = int(f.parent[u])


# ------------------------------------------------------------ matrix-tree oracle

@pytest.mark.parametrize("g,count", [
    (FiniteGraph.from_edges(2, [(0, 1)]), 1),
    (cycle_graph(4), 4),
    (complete_graph(4), 16),
    (grid_graph(2, 3), 15),
    (FiniteGraph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)]), 1),
])
def test_count_spanning_trees(g, count):
    assert count_spanning_trees(g) == count == det_oracle(g)
    assert len(enumerate_spanning_trees(g)) == count


@pytest.mark.parametrize("n", range(3, 12))
def test_cycle_counts(n):
    assert count_spanning_trees(cycle_graph(n)) == n


def test_count_on_wired_box_matches_determinant():
    g = FiniteGraph.from_box(wired_box(2, 3))
    assert count_spanning_trees(g) == det_oracle(g)


def test_count_empty_graph():
    with pytest.raises(ValueError):
        count_spanning_trees(FiniteGraph(0, np.zeros(1, np.int64), np.zeros(0, np.int64)))


# ------------------------------------------------------------ Wilson sampler

def test_single_edge():
    g = FiniteGraph.from_edges(2, [(0, 1)])
    for s in range(20):
        assert wilson_ust(g, 0, s).parent.tolist() == [NONE, 0]


def test_disconnected_graph_errors():
    g = FiniteGraph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        wilson_ust(g, 0, 1)


@pytest.mark.parametrize("g", [cycle_graph(5), complete_graph(5), grid_graph(3, 3),
                               FiniteGraph.from_box(wired_box(3, 3))])
def test_samples_are_spanning_trees(g):
    for s in range(50):
        assert_spanning_tree(wilson_ust(g, s % g.n, derive_seed(1, s)), g)


@pytest.mark.parametrize("g", [cycle_graph(4), complete_graph(4), grid_graph(2, 3)])
def test_uniformity_chi_square(g):
    trees = enumerate_spanning_trees(g)
    counts = Counter(wilson_ust(g, 0, derive_seed(2, i)).edge_set() for i in range(20_000))
    assert set(counts) <= set(trees)
    obs = [counts[t] for t in trees]
    assert stats.chisquare(obs).pvalue > 1e-3


def test_wilson_deterministic():
    g = FiniteGraph.from_box(wired_box(3, 4))
    a = wilson_ust(g, g.n - 1, 99).parent
    b = wilson_ust(g, g.n - 1, 99).parent
    assert np.array_equal(a, b)


# ------------------------------------------------------------ wired-box forests

def test_radius_one_box():
    f, lab = sample_usf_box(3, 1, 4)
    assert f.parent.tolist() == [NONE] and lab.count == 1


def test_line_box_distribution():
    # B_3^W in d=1 is a 6-cycle; F* is one path iff the removed edge touches v*
    g = wired_box(1, 3)
    n = 6000
    single = 0
    for i in range(n):
        f, lab = sample_usf_box(1, 3, derive_seed(3, i), graph=g)
        assert lab.count in (1, 2)
        runs = [k for k, _ in itertools.groupby(lab.label.tolist())]
        assert len(runs) == lab.count  # components are intervals
        single += lab.count == 1
    assert abs(single / n - 1 / 3) < 4 * np.sqrt(2 / 9 / n)


def test_component_count_equals_cut_edges():
    for s in range(20):
        f, lab = sample_usf_box(3, 4, s)
        assert lab.count == int((f.parent == NONE).sum())


def test_union_find_agrees_with_flood_fill():
    for s in range(20):
        f, lab = sample_usf_box(4, 4, derive_seed(4, s))
        other = flood_fill_labels(f)
        pairs = set(zip(lab.label.tolist(), other.label.tolist()))
        assert lab.count == other.count == len(pairs)


def test_usf_box_deterministic():
    a, _ = sample_usf_box(5, 4, 1234)
    b, _ = sample_usf_box(5, 4, 1234)
    assert np.array_equal(a.parent, b.parent)


# ------------------------------------------------------------ N(x, y)

def test_n_value_line_cut():
    g = wired_box(1, 4)  # ids 0..6 for -3..3
    parent = np.array([1, 2, NONE, 4, 5, 6, NONE])
    f = OrientedForest(parent, g.wired, "usf", graph=g)
    lab = ComponentLabeling(np.array([0, 0, 0, 1, 1, 1, 1]), 2)
    assert n_value(f, lab, 1, 5) == 1
    assert n_value(f, lab, 0, 2) == 0
    assert n_value(f, lab, 2, 3) == 1


def test_n_value_rejects_wired_vertex():
    f, lab = sample_usf_box(2, 3, 1)
    with pytest.raises(ValueError):
        n_value(f, lab, 0, f.graph.wired)


def test_n_value_properties():
    for s in range(10):
        f, lab = sample_usf_box(5, 4, derive_seed(5, s))
        g = f.graph
        nv = np.stack([n_values_from(f, x) for x in range(0, g.n_box, 7)])
        xs = np.arange(0, g.n_box, 7)
        assert np.all((nv == 0) == (lab.label[xs][:, None] == lab.label[None, :]))
        for i, x in enumerate(xs):
            for j, y in enumerate(xs):
                assert nv[i, y] == nv[j, x]
            # lattice neighbours in different components are at N = 1
            for y in g.neighbors[x]:
                if y != g.wired:
                    assert nv[i, y] == (0 if lab.same(x, y) else 1)


# ------------------------------------------------------------ domination chains

def test_domination_same_forest_at_step_zero():
    g = wired_box(3, 5)
    _, F = sample_usf_box(3, 5, 8, graph=g)
    v0 = g.index_of((0, 0, 0))
    c, q = domination_chains(F, [F], g, v0)
    assert c == q


def test_domination_chain_monotone():
    c, q = domination_growth(4, 4, 3, None, seed=6)
    assert len(c) == len(q) == 4
    assert c == sorted(c)


def test_domination_step_zero_same_law():
    g = wired_box(3, 5)
    runs = [domination_growth(3, 5, 0, None, derive_seed(9, i), graph=g) for i in range(400)]
    c = np.array([r[0][0] for r in runs], float)
    q = np.array([r[1][0] for r in runs], float)
    se = np.hypot(c.std(ddof=1), q.std(ddof=1)) / np.sqrt(len(c))
    assert abs(c.mean() - q.mean()) < 4 * se


def test_domination_negative_m():
    with pytest.raises(ValueError):
        domination_growth(3, 3, -1, None, 1)


# ------------------------------------------------------------ serialisation

def test_forest_roundtrip(tmp_path):
    f, _ = sample_usf_box(3, 4, 77)
    write_forest(f, tmp_path / "f.bin")
    g = read_forest(tmp_path / "f.bin")
    assert np.array_equal(f.parent, g.parent) and g.seed == 77 and g.kind == "usf"
    write_forest_csv(f, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "child,parent,child_coords,parent_coords"
    assert len(lines) - 1 == len(f.edges())


def test_read_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"\0" * 64)
    with pytest.raises(ValueError):
        read_forest(p)
