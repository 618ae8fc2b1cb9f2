import hashlib

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwlcis.geometry import Polyhedron, contains_many
from pwlcis.mpc import (ClosedLoop, EmptySampleSet, InfeasibleStep, LinearSystem, MpcProblem,
                        SampleSet, TrajStatus, collect, condense, dedup, partition,
                        read_points_csv, simulate, step_closed_loop, symmetrize, write_points_csv)
from pwlcis.numerics import Rng
from pwlcis.solver import solve_qp


def example1_mpc(horizon=10):
    sys = LinearSystem([[2.0, 1.0], [-1.0, 2.0]], np.eye(2))
    box = Polyhedron.box([-1, -1], [1, 1])
    return MpcProblem(sys, 1.0, 5000.0, 10.0, horizon, box, box)


def sparse_mpc_value(mpc, x0):
    """The MPC problem with states as decision variables (no condensing)."""
    A, B = mpc.system.A, mpc.system.B
    N, nx, nu = mpc.horizon, mpc.system.nx, mpc.system.nu
    X = cp.Variable((N + 1, nx))
    U = cp.Variable((N, nu))
    cost = cp.quad_form(X[N], mpc.P) + sum(cp.quad_form(X[k], mpc.Q) + cp.quad_form(U[k], mpc.R)
                                           for k in range(N))
    cons = [X[0] == x0]
    for k in range(N):
        cons += [X[k + 1] == A @ X[k] + B @ U[k], mpc.U.H @ U[k] <= mpc.U.h,
                 mpc.X.H @ X[k + 1] <= mpc.X.h]
    prob = cp.Problem(cp.Minimize(cost), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
    return prob.value, U.value


def test_rejects_asymmetric_sets():
    sys = LinearSystem(np.eye(2), np.eye(2))
    skew = Polyhedron.box([-1, -1], [1, 2])
    with pytest.raises(ValueError, match="0-symmetric"):
        MpcProblem(sys, 1.0, 1.0, 1.0, 5, skew, Polyhedron.box([-1, -1], [1, 1]))


def test_rejects_bad_weights():
    sys = LinearSystem(np.eye(2), np.eye(2))
    box = Polyhedron.box([-1, -1], [1, 1])
    with pytest.raises(ValueError):
        MpcProblem(sys, 1.0, 0.0, 1.0, 5, box, box)          # R must be PD
    with pytest.raises(ValueError):
        MpcProblem(sys, -1.0, 1.0, 1.0, 5, box, box)         # Q must be PSD
    with pytest.raises(ValueError):
        LinearSystem(np.eye(2), np.ones((3, 1)))


def test_scalar_weights_read_as_identity():
    m = example1_mpc()
    np.testing.assert_array_equal(m.P, 10.0 * np.eye(2))
    np.testing.assert_array_equal(m.R, 5000.0 * np.eye(2))


def test_condense_one_step_unconstrained_matches_analytic(rng):
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 1))
    big = Polyhedron.box(-1e6 * np.ones(3), 1e6 * np.ones(3))
    ubig = Polyhedron.box([-1e6], [1e6])
    mpc = MpcProblem(LinearSystem(A, B), np.eye(3), 0.7, np.diag([1.0, 2.0, 3.0]), 1, big, ubig)
    t = condense(mpc)
    x = rng.standard_normal(3)
    out = solve_qp(t.qp(x))
    R, P = mpc.R, mpc.P
    expected = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A @ x)
    np.testing.assert_allclose(out.point, expected, atol=1e-9)


def test_condense_example1_dimensions():
    t = condense(example1_mpc())
    assert t.H.shape == (20, 20)
    assert np.all(np.linalg.eigvalsh(t.H) > 0)


def test_condense_matches_sparse_formulation(rng):
    mpc = example1_mpc(horizon=4)
    t = condense(mpc)
    for _ in range(5):
        x0 = rng.uniform(-0.3, 0.3, 2)
        out = solve_qp(t.qp(x0))
        assert out.ok
        val, U = sparse_mpc_value(mpc, x0)
        assert out.objective + t.cost_offset(x0) == pytest.approx(val, rel=1e-6)
        np.testing.assert_allclose(out.point, U.reshape(-1), atol=1e-4)


def test_origin_is_equilibrium():
    t = condense(example1_mpc())
    out = solve_qp(t.qp(np.zeros(2)))
    np.testing.assert_allclose(out.point, 0.0, atol=1e-12)
    assert out.objective == pytest.approx(0.0, abs=1e-12)
    u, xn = step_closed_loop(t, np.zeros(2))
    assert np.all(u == 0) and np.all(xn == 0)


def test_step_respects_state_constraints(rng):
    mpc = example1_mpc()
    t = condense(mpc)
    for x in rng.uniform(-0.4, 0.4, (10, 2)):
        try:
            _, xn = step_closed_loop(t, x)
        except InfeasibleStep:
            continue
        assert np.all(mpc.X.H @ xn <= mpc.X.h + 1e-8)


def test_far_state_is_infeasible():
    with pytest.raises(InfeasibleStep):
        step_closed_loop(condense(example1_mpc()), np.array([5.0, -5.0]))


def test_simulate_from_origin():
    out = simulate(condense(example1_mpc()), np.zeros(2))
    assert out.status is TrajStatus.CONVERGED
    assert out.states.shape == (1, 2)


def test_uncontrollable_unstable_system_never_converges():
    sys = LinearSystem(2.0 * np.eye(2), np.zeros((2, 1)))
    mpc = MpcProblem(sys, 1.0, 1.0, 1.0, 5, Polyhedron.box([-1, -1], [1, 1]),
                     Polyhedron.box([-1], [1]))
    out = simulate(condense(mpc), np.array([0.1, 0.05]), max_steps=50)
    assert out.status in (TrajStatus.NOT_CONVERGED, TrajStatus.INFEASIBLE)


def test_converged_trajectory_properties():
    mpc = example1_mpc()
    t = condense(mpc)
    out = simulate(t, np.array([0.2, -0.1]))
    assert out.status is TrajStatus.CONVERGED
    assert np.max(np.abs(out.states[-1])) <= 1e-3
    assert np.all(np.max(np.abs(out.states[:-1]), axis=1) > 1e-3)
    assert np.all(contains_many(mpc.X, out.states, 1e-8))
    loop = ClosedLoop(t)
    for x in out.states:
        val = loop.solve(x).objective + t.cost_offset(x)
        assert val > 0 if np.any(x != 0) else val == 0


def test_collect_zero_starts():
    with pytest.raises(EmptySampleSet):
        collect(example1_mpc(), 0, Rng(1))


def test_collect_golden_and_worker_independence():
    mpc = example1_mpc()
    s1 = collect(mpc, 40, Rng(1).child(0), workers=1)
    s3 = collect(mpc, 40, Rng(1).child(0), workers=3)
    assert s1.points.tobytes() == s3.points.tobytes()
    assert s1.stats == s3.stats
    assert s1.stats["Converged"] > 0
    assert not s1.symmetric
    assert np.any(np.all(s1.points == 0, axis=1))
    assert np.all(contains_many(mpc.X, s1.points, 1e-8))
    # frozen from one recorded run
    assert s1.stats == GOLDEN_STATS
    assert hashlib.sha256(s1.points.tobytes()).hexdigest() == GOLDEN_SHA


GOLDEN_STATS = {"Converged": 33, "Infeasible": 7, "NotConverged": 0, "n_starts": 40,
                "pooled": 332, "unique": 332}
GOLDEN_SHA = "383c3142a02b7e8c01dda5461ecc1a2c66a4780d060c65b618c1d3b5eb4f8336"


def test_symmetrize_examples():
    s = symmetrize(SampleSet([[0.5, 0.2]]))
    assert s.symmetric
    assert sorted(map(tuple, s.points)) == [(-0.5, -0.2), (0.5, 0.2)]
    z = symmetrize(SampleSet([[0.0, 0.0]]))
    assert len(z) == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 60))
def test_symmetrize_properties(seed, k):
    g = np.random.default_rng(seed)
    P = np.round(g.uniform(-1, 1, (k, 3)), 1)          # coarse grid forces duplicates
    s = symmetrize(SampleSet(P))
    assert len(s) <= 2 * k
    again = symmetrize(s)
    assert again.points.tobytes() == s.points.tobytes()
    keys = {tuple(x) for x in s.points}
    assert all(tuple(-x + 0.0) in keys for x in s.points)


def test_partition_examples():
    s = partition(SampleSet([[0, -1], [0, 0], [0, 1]], symmetric=True))
    assert s.i_neg.tolist() == [0] and s.i0.tolist() == [1] and s.i_pos.tolist() == [2]
    flat = partition(symmetrize(SampleSet([[1.0, 0.0], [0.5, 0.0]])))
    assert len(flat.i_neg) == len(flat.i_pos) == 0
    with pytest.raises(ValueError):
        partition(SampleSet([[0.0, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_partition_covers_and_balances(seed):
    g = np.random.default_rng(seed)
    s = partition(symmetrize(SampleSet(g.uniform(-1, 1, (30, 2)))))
    idx = np.sort(np.concatenate([s.i0, s.i_neg, s.i_pos]))
    assert idx.tolist() == list(range(len(s)))
    assert len(s.i_neg) == len(s.i_pos)


def test_dedup_keeps_first_copy_in_order():
    P = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0 + 1e-13], [3.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(dedup(P), P[[0, 1, 3]])


def test_csv_roundtrip_is_bit_exact(tmp_path, rng):
    P = rng.standard_normal((50, 4)) * 1e-3
    write_points_csv(tmp_path / "s.csv", P)
    Q = read_points_csv(tmp_path / "s.csv")
    assert Q.tobytes() == P.tobytes()
