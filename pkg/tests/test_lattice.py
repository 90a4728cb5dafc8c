import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usf_lab.lattice import (Shell, axis_convolution_sum, inner_ids, l1_ball_points,
                             l1_ball_size, l1_sphere_size, rho, shell_points, span_distance,
                             wired_box)


def points(d, lo=-20, hi=20):
    return st.tuples(*[st.integers(lo, hi)] * d)


def brute_ball(d, r):
    rng = range(-r, r + 1)
    return [p for p in itertools.product(rng, repeat=d) if sum(map(abs, p)) <= r]


# ---------------------------------------------------------------- span / rho

def test_span_distance_examples():
    assert span_distance((0, 0), (1, 2)) == 4
    assert span_distance((3, -4, 5), (3, -4, 5)) == 1
    assert span_distance((0,) * 5, (1, 0, 0, 0, 0)) == 2


def test_span_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        span_distance((0, 0), (1,))


@given(points(3), points(3), points(3))
def test_span_distance_shifted_triangle(x, y, z):
    assert span_distance(x, z) <= span_distance(x, y) + span_distance(y, z) - 1
    assert span_distance(x, y) == span_distance(y, x) >= 1
    assert (span_distance(x, y) == 1) == (x == y)


def test_rho_examples():
    assert rho([(0, 0)], [(0, 0), (5, 5)]) == 1
    assert rho([(0,)], [(3,)]) == 4
    assert rho([(0, 0), (2, 0)], [(3, 0)]) == 2


def test_rho_errors():
    with pytest.raises(ValueError):
        rho([], [(1,)])
    with pytest.raises(ValueError):
        rho([(0, 0)], [(1,)])


@given(st.lists(points(2), min_size=1, max_size=5), st.lists(points(2), min_size=1, max_size=5))
def test_rho_is_min_over_pairs(V, W):
    assert rho(V, W) == min(span_distance(v, w) for v in V for w in W)


# ----------------------------------------------------------------- balls

@pytest.mark.parametrize("d,r", [(1, 0), (1, 5), (2, 4), (3, 3), (5, 3)])
def test_ball_sizes_match_enumeration(d, r):
    pts = brute_ball(d, r)
    assert l1_ball_size(d, r) == len(pts)
    got = l1_ball_points(d, r)
    assert sorted(map(tuple, got.tolist())) == sorted(pts)
    sphere = sum(1 for p in pts if sum(map(abs, p)) == r)
    assert l1_sphere_size(d, r) == sphere


def test_five_dim_radius_three_ball():
    assert l1_ball_size(5, 3) == 231


# ----------------------------------------------------------------- shells

def test_shell_membership_and_errors():
    s = Shell((0, 0), 1, 3)
    assert s.contains((1, 0)) and s.contains((3, 3)) and not s.contains((0, 0))
    assert not s.contains((4, 3))
    with pytest.raises(ValueError):
        Shell((0,), 2, 2)


def test_shell_points_examples():
    pts = shell_points(Shell((0,), 1, 3))
    assert sorted(pts.ravel().tolist()) == [x for x in range(-6, 7) if x != 0]
    assert shell_points(Shell((0, 0), 0, 1)).tolist() == [[0, 0]]
    a = shell_points(Shell((0, 0), 1, 2))
    b = shell_points(Shell((7, 7), 1, 2))
    assert sorted(map(tuple, (a + 7).tolist())) == sorted(map(tuple, b.tolist()))


@pytest.mark.parametrize("d,center", [(1, (4,)), (2, (1, -2)), (3, (0, 0, 0))])
def test_shell_points_exact_membership(d, center):
    s = Shell(center, 1, 4)
    got = set(map(tuple, shell_points(s).tolist()))
    box = range(-16, 17)
    want = {tuple(c + o for c, o in zip(center, p)) for p in itertools.product(box, repeat=d)
            if s.contains(tuple(c + o for c, o in zip(center, p)))}
    assert got == want


def test_shell_union_of_dyadic_pieces():
    whole = set(map(tuple, shell_points(Shell((0, 0, 0), 1, 5)).tolist()))
    pieces = [set(map(tuple, shell_points(Shell((0, 0, 0), k, k + 1)).tolist()))
              for k in range(1, 5)]
    assert sum(map(len, pieces)) == len(whole)
    assert set().union(*pieces) == whole


@pytest.mark.parametrize("d", [1, 2, 3])
def test_dyadic_shell_volume_ratio_bounded(d):
    ratios = [len(shell_points(Shell((0,) * d, k, k + 1))) / 2 ** (d * k) for k in range(1, 7)]
    assert min(ratios) > 0 and max(ratios) / min(ratios) < 4


def test_shell_budget():
    with pytest.raises(MemoryError):
        shell_points(Shell((0,) * 4, 1, 8), max_points=1000)


# ----------------------------------------------------------------- wired box

def test_wired_box_line():
    g = wired_box(1, 2)
    assert g.n_vertices == 4
    assert [g.point(i) for i in range(g.n_box)] == [(-1,), (0,), (1,)]
    assert g.neighbors.tolist() == [[1, 3], [2, 0], [3, 1]]


def test_wired_box_single_vertex():
    g = wired_box(2, 1)
    assert g.n_box == 1
    assert g.neighbors.tolist() == [[1, 1, 1, 1]]


def test_wired_box_five_dims():
    g = wired_box(5, 4)
    assert g.n_vertices == 231 + 1


@pytest.mark.parametrize("d,R", [(1, 4), (2, 5), (3, 4), (5, 3)])
def test_wired_box_invariants(d, R):
    g = wired_box(d, R)
    assert g.neighbors.shape == (g.n_box, 2 * d)
    coords = g.coords
    assert np.all(np.abs(coords).sum(axis=1) < R)
    assert [tuple(r) for r in coords.tolist()] == sorted(tuple(r) for r in coords.tolist())
    for i in range(g.n_box):
        for slot, j in enumerate(g.neighbors[i]):
            step = np.zeros(d, dtype=np.int64)
            step[slot // 2] = 1 if slot % 2 == 0 else -1
            q = coords[i] + step
            if np.abs(q).sum() < R:
                assert j == g.index_of(q) and g.point(j) == tuple(q.tolist())
            else:
                assert j == g.wired
    # half-edge count: every edge is seen from both ends
    indptr, indices = g.csr()
    assert g.degree_sum() == indices.size
    deg_w = indptr[-1] - indptr[-2]
    assert g.degree_sum() == 2 * (g.n_box * 2 * d - deg_w) // 2 + 2 * deg_w


def test_wired_box_connected():
    from usf_lab.wilson import FiniteGraph
    assert FiniteGraph.from_box(wired_box(3, 4)).is_connected()


def test_wired_box_budget_message():
    with pytest.raises(MemoryError, match="vertices"):
        wired_box(6, 40, max_vertices=1000)


def test_inner_ids():
    g = wired_box(2, 6)
    ids = inner_ids(g, 2)
    assert sorted(g.point(i) for i in ids) == sorted(brute_ball(2, 1))


# ----------------------------------------------------------------- l.conv1

@settings(max_examples=20, deadline=None)
@given(st.sampled_from([(1, 4), (2, 3), (3, 3)]), st.integers(1, 6))
def test_axis_convolution_sum_matches_bruteforce(dr, t):
    d, radius = dr
    v = (t - 1,) + (0,) * (d - 1)
    want = sum(span_distance((0,) * d, x) ** -1.5 * span_distance(x, v) ** -2.5
               for x in brute_ball(d, radius - 1))
    assert axis_convolution_sum(d, 1.5, 2.5, t, radius) == pytest.approx(want, rel=1e-12)
