import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from oracles import highs_lp, same_point_sets
from pwlcis.geometry import hull_2d
from pwlcis.mpc import SampleSet, symmetrize
from pwlcis.pruning import in_hull_of, prune, prune_exact, prune_simplex


def sym(points):
    return symmetrize(SampleSet(np.vstack([np.asarray(points, float), np.zeros((1, np.shape(points)[1]))])))


def test_simplex_sweep_drops_interior_point():
    s = sym([[1, 1], [-1, 1], [-1, -1], [1, -1], [0.3, 0.1]])
    out = prune_simplex(s)
    kept = {tuple(p) for p in out.points}
    assert {(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)} <= kept
    assert (0.3, 0.1) not in kept and (-0.3, -0.1) not in kept


def test_simplex_sweep_needs_symmetric_input():
    with pytest.raises(ValueError):
        prune_simplex(SampleSet([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        prune(SampleSet([[1.0, 0.0], [0.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 150))
def test_simplex_sweep_preserves_2d_hull(seed, n):
    g = np.random.default_rng(seed)
    s = sym(g.standard_normal((n, 2)))
    out = prune_simplex(s)
    assert same_point_sets(hull_2d(out.points), hull_2d(s.points), 1e-9)


def test_sphere_points_all_survive():
    t = np.linspace(0, np.pi, 23)[:-1]
    s = sym(np.c_[np.cos(t), np.sin(t)])
    out = prune(s)
    assert len(out) == 2 * len(t)


def test_exact_sweep_examples():
    a, b = np.array([0.0, 0.0]), np.array([2.0, 1.0])
    out = prune_exact(SampleSet([a, (a + b) / 2, b, [0.0, 1.0]]))
    assert len(out) == 3
    verts = SampleSet([[0, 0], [1, 0], [0, 1]])
    assert prune_exact(verts).points.tolist() == verts.points.tolist()


def test_in_hull_of():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert in_hull_of(tri, [0.2, 0.2])
    assert not in_hull_of(tri, [0.8, 0.8])
    assert not in_hull_of(np.zeros((0, 2)), [0.0, 0.0])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 4), k=st.integers(10, 80))
def test_prune_keeps_exactly_hull_vertices(seed, n, k):
    g = np.random.default_rng(seed)
    s = sym(g.standard_normal((k, n)))
    out = prune(s)
    ref = s.points[ConvexHull(s.points).vertices]
    assert same_point_sets(out.points, ref, 1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_prune_preserves_hull_by_lp(seed, n):
    g = np.random.default_rng(seed)
    s = sym(g.standard_normal((120, n)))
    out = prune(s)
    k = len(out)
    for x in s.points[g.choice(len(s), size=min(200, len(s)), replace=False)]:
        res = highs_lp(np.zeros(k), A_eq=np.vstack([out.points.T, np.ones((1, k))]),
                       b_eq=np.append(x, 1.0), nonneg=True)
        assert res.status == 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_prune_monotone_idempotent_symmetric(seed):
    g = np.random.default_rng(seed)
    s = sym(g.standard_normal((60, 3)))
    once = prune(s)
    assert len(once) <= len(s)
    twice = prune(once)
    assert same_point_sets(twice.points, once.points, 0.0)
    keys = {tuple(p) for p in once.points}
    assert all(tuple(-p + 0.0) in keys for p in once.points)
    assert len(once.i_neg) == len(once.i_pos)
    assert once.stats["before_prune"] == len(s) and once.stats["after_prune"] == len(once)
