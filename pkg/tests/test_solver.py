import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cvx_qp, enumerate_active_sets, highs_lp, random_qp
from pwlcis.solver import LpProblem, QpProblem, Status, qp_kkt_residual, solve_lp, solve_qp


def test_qp_single_active_constraint():
    out = solve_qp(QpProblem([[2.0]], [0.0], [[-1.0]], [-1.0]))
    assert out.status is Status.OPTIMAL
    assert out.point[0] == pytest.approx(1.0, abs=1e-12)
    assert out.objective == pytest.approx(1.0, abs=1e-12)
    assert out.ineq_dual[0] == pytest.approx(2.0, abs=1e-10)


def test_qp_one_step_lqr_analytic(rng):
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    P = np.diag([2.0, 1.0, 3.0])
    R = np.diag([0.5, 1.5])
    x = rng.standard_normal(3)
    H = R + B.T @ P @ B
    out = solve_qp(QpProblem(2 * H, 2 * B.T @ P @ A @ x))
    expected = -np.linalg.solve(H, B.T @ P @ A @ x)
    np.testing.assert_allclose(out.point, expected, atol=1e-10)


def test_qp_inconsistent_constraints():
    out = solve_qp(QpProblem([[2.0]], [0.0], [[1.0], [-1.0]], [0.0, -1.0]))
    assert out.status is Status.INFEASIBLE


def test_qp_zero_row_with_negative_rhs_is_infeasible():
    out = solve_qp(QpProblem(np.eye(2), [0, 0], [[0.0, 0.0]], [-1.0]))
    assert out.status is Status.INFEASIBLE


def test_qp_rejects_asymmetric_hessian():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 1.0], [0.0, 1.0]], [0, 0])


def test_qp_iteration_limit():
    g = np.random.default_rng(3)
    H, c, G, b = random_qp(g, 6, 20)
    out = solve_qp(QpProblem(H, c, G, b), max_iter=1)
    full = solve_qp(QpProblem(H, c, G, b))
    assert full.ok
    if full.iterations > 1:
        assert out.status is Status.ITER_LIMIT


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), m=st.integers(0, 20))
def test_qp_matches_clarabel_and_passes_kkt(seed, n, m):
    g = np.random.default_rng(seed)
    H, c, G, b = random_qp(g, n, m)
    p = QpProblem(H, c, G, b)
    out = solve_qp(p)
    assert out.status is Status.OPTIMAL
    assert qp_kkt_residual(p, out.point, out.ineq_dual) <= 1e-8
    _, val, status = cvx_qp(H, c, G, b)
    assert status == "optimal"
    assert out.objective == pytest.approx(val, rel=1e-6, abs=1e-6)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), m=st.integers(0, 6))
def test_qp_matches_active_set_enumeration(seed, n, m):
    g = np.random.default_rng(seed)
    H, c, G, b = random_qp(g, n, m)
    out = solve_qp(QpProblem(H, c, G, b))
    x_ref, val_ref = enumerate_active_sets(H, c, G, b)
    assert out.objective == pytest.approx(val_ref, abs=1e-8 * max(1, abs(val_ref)))
    np.testing.assert_allclose(out.point, x_ref, atol=1e-7)


def test_qp_cost_scaling_leaves_point(rng):
    H, c, G, b = random_qp(rng, 5, 12)
    a = solve_qp(QpProblem(H, c, G, b))
    z = solve_qp(QpProblem(7.5 * H, 7.5 * c, G, b))
    np.testing.assert_allclose(a.point, z.point, atol=1e-8)


def test_qp_warm_start_same_answer(rng):
    H, c, G, b = random_qp(rng, 6, 15)
    cold = solve_qp(QpProblem(H, c, G, b))
    warm = solve_qp(QpProblem(H, c, G, b), x0=cold.point)
    np.testing.assert_allclose(cold.point, warm.point, atol=1e-9)
    # an infeasible warm start falls back to phase one
    bad = solve_qp(QpProblem(H, c, G, b), x0=cold.point + 100.0)
    np.testing.assert_allclose(cold.point, bad.point, atol=1e-8)


def test_qp_is_deterministic(rng):
    H, c, G, b = random_qp(rng, 7, 25)
    a = solve_qp(QpProblem(H, c, G, b))
    z = solve_qp(QpProblem(H, c, G, b))
    assert a.point.tobytes() == z.point.tobytes()


def test_lp_lower_bound():
    out = solve_lp(LpProblem([1.0], [[-1.0]], [-2.0]))
    assert out.status is Status.OPTIMAL
    assert out.objective == pytest.approx(2.0)


def test_lp_unbounded():
    out = solve_lp(LpProblem([-1.0], [[-1.0]], [0.0]))
    assert out.status is Status.UNBOUNDED


def test_lp_infeasible():
    out = solve_lp(LpProblem([0.0], [[1.0], [-1.0]], [0.0, -1.0]))
    assert out.status is Status.INFEASIBLE


def test_lp_over_simplex_picks_min_component(rng):
    c = rng.standard_normal(7)
    out = solve_lp(LpProblem(c, eqA=np.ones((1, 7)), eqB=[1.0], nonneg=True))
    assert out.objective == pytest.approx(c.min(), abs=1e-12)
    assert out.point[np.argmin(c)] == pytest.approx(1.0)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), m=st.integers(1, 15),
       me=st.integers(0, 2), nonneg=st.booleans())
def test_lp_matches_highs(seed, n, m, me, nonneg):
    g = np.random.default_rng(seed)
    A = g.standard_normal((m, n))
    x0 = np.abs(g.standard_normal(n))
    b = A @ x0 + g.uniform(0, 1, m)
    Ae = g.standard_normal((me, n)) if me else None
    be = Ae @ x0 if me else None
    c = g.standard_normal(n)
    ref = highs_lp(c, A, b, Ae, be, nonneg)
    out = solve_lp(LpProblem(c, A, b, Ae, be, np.full(n, nonneg)))
    if ref.status == 3:
        assert out.status is Status.UNBOUNDED
    else:
        assert ref.status == 0
        assert out.status is Status.OPTIMAL
        assert out.objective == pytest.approx(ref.fun, rel=1e-8, abs=1e-8)
        assert out.kkt_residual <= 1e-8
        assert np.all(A @ out.point <= b + 1e-8)


def test_lp_duals_certify_optimum(rng):
    A = rng.standard_normal((10, 4))
    b = A @ rng.standard_normal(4) + 1.0
    c = -A.T @ np.abs(rng.standard_normal(10))      # bounded by construction
    out = solve_lp(LpProblem(c, A, b))
    assert out.ok
    mu = out.ineq_dual
    assert np.all(mu >= -1e-10)
    np.testing.assert_allclose(c + A.T @ mu, 0.0, atol=1e-9)
    assert out.objective == pytest.approx(-mu @ b, abs=1e-9)
