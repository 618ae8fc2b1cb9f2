import numpy as np
import pytest

from oracles import highs_lp, k_step_admissible_lp, support_polygon_area
from pwlcis.geometry import EmptySetError, Polyhedron, contains, contains_many, polygon_2d, polygon_area, vertices
from pwlcis.invariant import (assemble, certify_invariance, containment_stats, is_subset,
                              maximal_ci_oracle, model_rows, pre, vertex_slack)
from pwlcis.mpc import LinearSystem, SampleSet, partition, symmetrize
from pwlcis.pwlfit import FitConfig, PwlModel, fit

SYS1 = LinearSystem([[2.0, 1.0], [-1.0, 2.0]], np.eye(2))
BOX = Polyhedron.box([-1, -1], [1, 1])
# frozen: area of the 2-/3-step admissible set from HiGHS support LPs plus qhull
ORACLE_AREA = 44.0 / 15.0


@pytest.fixture(scope="module")
def oracle1():
    return maximal_ci_oracle(SYS1, BOX, BOX)


def test_model_rows_layout():
    H, b = model_rows(PwlModel([[0.5, -0.2, 0.3]]))
    np.testing.assert_array_equal(H, [[0.5, -0.2, -1.0]])
    np.testing.assert_array_equal(b, [-0.3])


def test_assemble_constant_piece_gives_slab():
    om = assemble(PwlModel([[0.0, -0.5]]), BOX)
    lo, hi = om.bounding_box()
    np.testing.assert_allclose(lo, [-1, -0.5])
    np.testing.assert_allclose(hi, [1, 0.5])
    assert om.is_symmetric()


def test_assemble_row_counts_and_symmetry(rng):
    g = rng
    alpha = np.c_[g.uniform(-0.5, 0.5, 5), -g.uniform(0.3, 0.9, 5)]
    raw = assemble(PwlModel(alpha), BOX, reduce=False)
    assert raw.n_rows == 14
    om = assemble(PwlModel(alpha), BOX)
    assert om.n_rows <= 14
    assert om.is_symmetric()
    pts = g.uniform(-1.2, 1.2, (1000, 2))
    np.testing.assert_array_equal(contains_many(om, pts), contains_many(om, -pts))
    np.testing.assert_array_equal(contains_many(om, pts, 0.0), contains_many(raw, pts, 0.0))


def test_assemble_contains_fitted_cloud():
    g = np.random.default_rng(8)
    P = g.uniform(-1, 1, (300, 2))
    P = P[np.abs(P[:, 0]) + np.abs(P[:, 1]) <= 1.0]
    s = partition(symmetrize(SampleSet(P)))
    model, _ = fit(s.fit_points, FitConfig(M_candidates=[3], restarts=3), bound=s.points[s.i_pos])
    om = assemble(model, BOX)
    assert containment_stats(om, s.points) == 1.0
    assert containment_stats(om.scaled(0.5), s.points) < 1.0
    assert containment_stats(om, np.zeros((0, 2))) == 1.0
    assert np.all(contains_many(BOX, vertices(om), 1e-8))


def test_assemble_empty_model_raises():
    with pytest.raises(EmptySetError):
        # pieces above x2 = 1 on the whole box, mirrored below -1: nothing left
        assemble(PwlModel([[0.0, 2.0]]), BOX)


def test_certify_corner_by_hand():
    # A (1, 1) = (3, 1); the best input reaches (2, 0): one unit outside x1 <= 1
    assert vertex_slack(BOX, SYS1, BOX, np.array([1.0, 1.0])) == pytest.approx(1.0, abs=1e-9)
    cert = certify_invariance(BOX, SYS1, BOX)
    assert cert.max_violation == pytest.approx(1.0, abs=1e-9)
    assert not cert.certified
    lines = cert.to_csv().splitlines()
    assert lines[0] == "x1,x2,s" and len(lines) == 5


def test_certify_single_point_set():
    cert = certify_invariance(Polyhedron.box([0, 0], [0, 0]), SYS1, BOX)
    assert len(cert.vertices) == 1 and cert.certified


def test_oracle_contraction_keeps_box():
    sys = LinearSystem(0.5 * np.eye(2), np.zeros((2, 1)))
    res = maximal_ci_oracle(sys, BOX, Polyhedron.box([-1], [1]))
    assert res.converged and res.iterations == 1
    assert is_subset(res.omega, BOX) and is_subset(BOX, res.omega)


def test_oracle_example1(oracle1):
    assert oracle1.converged and oracle1.iterations <= 50
    cert = certify_invariance(oracle1.omega, SYS1, BOX)
    assert cert.max_violation <= 1e-8
    assert polygon_area(polygon_2d(oracle1.omega)) == pytest.approx(ORACLE_AREA, abs=1e-9)
    assert oracle1.omega.is_symmetric()


def test_oracle_matches_k_step_lp(oracle1, rng):
    K = oracle1.iterations
    Hx, Hu, h = k_step_admissible_lp(SYS1.A, SYS1.B, BOX.H, BOX.h, BOX.H, BOX.h, K)
    assert support_polygon_area(Hx, Hu, h)[0] == pytest.approx(ORACLE_AREA, abs=1e-9)
    checked = 0
    for x in rng.uniform(-1, 1, (300, 2)):
        inner = highs_lp(np.zeros(Hu.shape[1]), Hu, h - Hx @ x - 1e-7).status == 0
        outer = highs_lp(np.zeros(Hu.shape[1]), Hu, h - Hx @ x + 1e-7).status == 0
        if inner == outer:
            assert contains(oracle1.omega, x, 0.0) == inner
            checked += 1
    assert checked > 250


def test_pre_matches_lp(rng):
    S = Polyhedron.box([-0.5, -0.5], [0.5, 0.5])
    P1 = pre(S, SYS1, BOX)
    for x in rng.uniform(-1, 1, (200, 2)):
        res = highs_lp(np.zeros(2), np.vstack([S.H @ SYS1.B, BOX.H]),
                       np.concatenate([S.h - S.H @ SYS1.A @ x, BOX.h]))
        if abs(np.max(S.H @ SYS1.A @ x) - 0.5) > 1e-6:
            assert contains(P1, x, 1e-9) == (res.status == 0)


def test_is_subset():
    small = Polyhedron.box([-0.5, -0.5], [0.5, 0.5])
    assert is_subset(small, BOX)
    assert not is_subset(BOX, small)
