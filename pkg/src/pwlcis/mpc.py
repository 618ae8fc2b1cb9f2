"""Linear MPC closed-loop sampling.

The MPC problem has no terminal-set constraint: the horizon is chosen long
enough that the closed loop converges from feasible starts, and only states
of trajectories that actually reach the origin are kept.
"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Polyhedron, contains, symmetric_pairs
from .numerics import Rng, uniform_in_box
from .solver import QpProblem, Status, solve_qp

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-12


class InfeasibleStep(Exception):
    """The MPC problem has no feasible input sequence at this state."""


class EmptySampleSet(Exception):
    pass


@dataclass
class LinearSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B[:, None]
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx) or self.B.shape[0] != nx:
            raise ValueError("A must be n_x x n_x and B must have n_x rows")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ValueError("system matrices must be finite")

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]


def _check_psd(name, M, strict=False):
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.abs(M).max()):
        raise ValueError(f"{name} must be symmetric")
    ev = np.linalg.eigvalsh(M)
    if strict and ev.min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    if ev.min() < -1e-12 * max(1.0, np.abs(ev).max()):
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass
class MpcProblem:
    system: LinearSystem
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    horizon: int
    X: Polyhedron
    U: Polyhedron

    def __post_init__(self):
        nx, nu = self.system.nx, self.system.nu
        self.Q = _as_weight(self.Q, nx)
        self.R = _as_weight(self.R, nu)
        self.P = _as_weight(self.P, nx)
        _check_psd("Q", self.Q)
        _check_psd("P", self.P)
        _check_psd("R", self.R, strict=True)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.X.dim != nx or self.U.dim != nu:
            raise ValueError("constraint set dimensions do not match the system")
        for name, S in (("X", self.X), ("U", self.U)):
            if symmetric_pairs(S) is None:
                raise ValueError(f"{name} is not 0-symmetric")
            if not np.all(S.h > 0):
                raise ValueError(f"{name} must contain the origin in its interior")


def _as_weight(W, n):
    """Scalars and vectors are read as ``w * I`` and ``diag(w)``."""
    W = np.asarray(W, dtype=float)
    if W.ndim == 0:
        return float(W) * np.eye(n)
    if W.ndim == 1:
        return np.diag(W)
    return W


@dataclass
class CondensedMpc:
    """QP template in ``U = [u_0; ...; u_{N-1}]``.

    For an initial state ``x0`` the problem is::

        min 1/2 U'HU + (F x0)'U + x0' C x0   s.t.  G U <= w + E x0

    where the constant term makes the objective equal the MPC cost.
    """

    mpc: MpcProblem
    H: np.ndarray
    F: np.ndarray
    C: np.ndarray
    G: np.ndarray
    w: np.ndarray
    E: np.ndarray
    Phi: np.ndarray
    Gamma: np.ndarray

    def qp(self, x0) -> QpProblem:
        x0 = np.asarray(x0, dtype=float)
        return QpProblem(self.H, self.F @ x0, self.G, self.w + self.E @ x0)

    def cost_offset(self, x0) -> float:
        x0 = np.asarray(x0, dtype=float)
        return float(x0 @ self.C @ x0)

    def predict(self, x0, U) -> np.ndarray:
        """Predicted states ``x_1..x_N`` as an ``(N, n_x)`` array."""
        nx = self.mpc.system.nx
        return (self.Phi @ x0 + self.Gamma @ U).reshape(-1, nx)


def condense(mpc: MpcProblem) -> CondensedMpc:
    A, B = mpc.system.A, mpc.system.B
    nx, nu, N = mpc.system.nx, mpc.system.nu, mpc.horizon
    Phi = np.zeros((N * nx, nx))
    Gamma = np.zeros((N * nx, N * nu))
    Ak = np.eye(nx)
    powers = [Ak]
    for k in range(1, N + 1):
        Ak = A @ Ak
        powers.append(Ak)
        Phi[(k - 1) * nx:k * nx] = Ak
    for k in range(1, N + 1):
        for j in range(k):
            Gamma[(k - 1) * nx:k * nx, j * nu:(j + 1) * nu] = powers[k - 1 - j] @ B
    Qbar = np.zeros((N * nx, N * nx))
    for k in range(N - 1):
        Qbar[k * nx:(k + 1) * nx, k * nx:(k + 1) * nx] = mpc.Q
    Qbar[(N - 1) * nx:, (N - 1) * nx:] = mpc.P
    Rbar = np.kron(np.eye(N), mpc.R)
    H = 2.0 * (Gamma.T @ Qbar @ Gamma + Rbar)
    H = 0.5 * (H + H.T)
    F = 2.0 * Gamma.T @ Qbar @ Phi
    C = Phi.T @ Qbar @ Phi + mpc.Q
    # input rows for every step, then state rows for x_1..x_N
    HU, hU = mpc.U.H, mpc.U.h
    HX, hX = mpc.X.H, mpc.X.h
    Gu = np.kron(np.eye(N), HU)
    wu = np.tile(hU, N)
    HXbar = np.kron(np.eye(N), HX)
    Gx = HXbar @ Gamma
    wx = np.tile(hX, N)
    G = np.vstack([Gu, Gx])
    w = np.concatenate([wu, wx])
    E = np.vstack([np.zeros((Gu.shape[0], nx)), -HXbar @ Phi])
    return CondensedMpc(mpc, H, F, C, G, w, E, Phi, Gamma)


class ClosedLoop:
    """Receding-horizon controller that warm-starts from the shifted plan."""

    def __init__(self, template: CondensedMpc, tol: float = 1e-8):
        self.t = template
        self.tol = tol
        self._plan = None

    def reset(self):
        self._plan = None

    def solve(self, x):
        qp = self.t.qp(x)
        out = solve_qp(qp, tol=self.tol, x0=self._plan)
        if out.status is Status.INFEASIBLE:
            raise InfeasibleStep(f"no feasible input sequence at x={x}")
        if out.status is not Status.OPTIMAL:
            raise RuntimeError(f"MPC QP ended with status {out.status.value}")
        return out

    def step(self, x):
        x = np.asarray(x, dtype=float)
        out = self.solve(x)
        nu = self.t.mpc.system.nu
        U = out.point
        u = U[:nu].copy()
        x_next = self.t.mpc.system.A @ x + self.t.mpc.system.B @ u
        self._plan = np.concatenate([U[nu:], np.zeros(nu)])
        return u, x_next


def step_closed_loop(template: CondensedMpc, x):
    """One closed-loop step; raises :class:`InfeasibleStep`."""
    return ClosedLoop(template).step(x)


class TrajStatus(str, enum.Enum):
    CONVERGED = "Converged"
    INFEASIBLE = "Infeasible"
    NOT_CONVERGED = "NotConverged"


@dataclass
class TrajectoryOutcome:
    status: TrajStatus
    states: np.ndarray


def simulate(template: CondensedMpc, x0, conv_tol: float = 1e-3, max_steps: int = 200) -> TrajectoryOutcome:
    if conv_tol <= 0:
        raise ValueError("conv_tol must be positive")
    loop = ClosedLoop(template)
    x = np.asarray(x0, dtype=float)
    states = [x]
    for k in range(max_steps + 1):
        if np.max(np.abs(x)) <= conv_tol:
            return TrajectoryOutcome(TrajStatus.CONVERGED, np.array(states))
        if k == max_steps:
            break
        try:
            _, x = loop.step(x)
        except InfeasibleStep:
            return TrajectoryOutcome(TrajStatus.INFEASIBLE, np.array(states))
        states.append(x)
    return TrajectoryOutcome(TrajStatus.NOT_CONVERGED, np.array(states))


@dataclass
class SampleSet:
    points: np.ndarray
    symmetric: bool = False
    i0: np.ndarray = None
    i_neg: np.ndarray = None
    i_pos: np.ndarray = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def fit_points(self) -> np.ndarray:
        """Samples with a non-positive last coordinate (``I_0`` and ``I_N``)."""
        if self.i0 is None:
            raise ValueError("sample set is not partitioned")
        return self.points[np.sort(np.concatenate([self.i0, self.i_neg]))]

    def to_csv(self, path):
        write_points_csv(path, self.points)

    @classmethod
    def from_csv(cls, path, symmetric=False):
        return cls(read_points_csv(path), symmetric=symmetric)


def write_points_csv(path, points):
    points = np.atleast_2d(points)
    lines = [",".join(f"{v:.17g}" for v in row) for row in points]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_points_csv(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if not text:
        return np.zeros((0, 0))
    return np.array([[float(v) for v in ln.split(",")] for ln in text.splitlines()])


def dedup(points, tol: float = DEDUP_TOL) -> np.ndarray:
    """Drop near-duplicate rows (lexicographic neighbours within ``tol``),
    keeping the earliest copy and the input order."""
    P = np.atleast_2d(points)
    if P.shape[0] < 2:
        return P.copy()
    order = np.lexsort(P.T[::-1])
    S = P[order]
    starts = np.r_[True, np.max(np.abs(np.diff(S, axis=0)), axis=1) > tol]
    keep = np.minimum.reduceat(order, np.flatnonzero(starts))
    return P[np.sort(keep)]


def _draw_start(X: Polyhedron, lo, hi, rng: Rng, max_tries=10_000):
    for _ in range(max_tries):
        x = uniform_in_box(rng, lo, hi)
        if contains(X, x, 0.0):
            return x
    raise RuntimeError("rejection sampling failed to hit X")


def _run_start(args):
    template, x0, conv_tol, max_steps = args
    return simulate(template, x0, conv_tol, max_steps)


def collect(mpc: MpcProblem, n_starts: int, rng: Rng, conv_tol: float = 1e-3,
            max_steps: int = 200, workers: int = 1) -> SampleSet:
    """Pool the states of every converged closed-loop trajectory.

    Start ``i`` is drawn from ``rng.child(i)`` (uniform on X's bounding box,
    rejected until inside X), so results do not depend on ``workers``.
    """
    template = condense(mpc)
    lo, hi = mpc.X.bounding_box()
    starts = [_draw_start(mpc.X, lo, hi, rng.child(i)) for i in range(n_starts)]
    jobs = [(template, x0, conv_tol, max_steps) for x0 in starts]
    if workers > 1 and n_starts > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_run_start, jobs, chunksize=max(1, n_starts // (4 * workers))))
    else:
        outcomes = [_run_start(j) for j in jobs]
    counts = {s.value: 0 for s in TrajStatus}
    pooled = []
    for o in outcomes:
        counts[o.status.value] += 1
        if o.status is TrajStatus.CONVERGED:
            pooled.append(o.states)
    if not pooled:
        raise EmptySampleSet("no trajectory converged")
    pooled.append(np.zeros((1, mpc.system.nx)))
    raw = np.vstack(pooled)
    pts = dedup(raw)
    stats = dict(counts, n_starts=n_starts, pooled=int(raw.shape[0]), unique=int(pts.shape[0]))
    logger.info("sampling: %s", stats)
    return SampleSet(pts, symmetric=False, stats=stats)


def symmetrize(s: SampleSet) -> SampleSet:
    pts = dedup(np.vstack([s.points, -s.points]))
    return SampleSet(pts, symmetric=True, stats=dict(s.stats))


def partition(s: SampleSet, zero_tol: float = 1e-12) -> SampleSet:
    if not s.symmetric:
        raise ValueError("partition expects a symmetrized sample set")
    last = s.points[:, -1] if len(s) else np.zeros(0)
    i0 = np.flatnonzero(np.abs(last) <= zero_tol)
    i_neg = np.flatnonzero(last < -zero_tol)
    i_pos = np.flatnonzero(last > zero_tol)
    return SampleSet(s.points, True, i0, i_neg, i_pos, dict(s.stats))
