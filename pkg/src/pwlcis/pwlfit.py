"""Convex piecewise-linear lower bound of a point cloud.

The last coordinate of every fitted sample is bounded from below by a
max-affine function of the remaining coordinates::

    y_hat(x) = max_k  alpha_k . [x, 1]   with   alpha_k . [x_i, 1] <= y_i  for all k, i

The squared gap ``J = sum_i (y_hat(x_i) - y_i)^2`` is minimised by alternating
between assigning each sample to its active piece and solving one QP over all
pieces with the assignment frozen.  A step that fails to lower ``J`` is
shortened by halving toward the previous model.

The constraint set may be larger than the fitted set: passing ``bound``
points keeps every piece below those samples too, without adding them to
``J``.  The pipeline uses this to keep the pieces below the hull vertices
with a positive last coordinate, which the lower bound must also respect
for the assembled set to contain every sample.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Rng
from .solver import QpProblem, Status, solve_qp

logger = logging.getLogger(__name__)


class EmptyFitSet(ValueError):
    pass


@dataclass
class PwlModel:
    """Pieces ``alpha`` of shape ``(M, n_x)``; the last column is the offset."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("model coefficients must be finite")

    @property
    def M(self) -> int:
        return self.alpha.shape[0]

    @property
    def nx(self) -> int:
        return self.alpha.shape[1]

    def to_text(self) -> str:
        lines = [f"{self.M} {self.nx}"]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in self.alpha]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PwlModel":
        rows = [ln.split() for ln in text.strip().splitlines()]
        M, n = int(rows[0][0]), int(rows[0][1])
        return cls(np.array([[float(v) for v in r] for r in rows[1:1 + M]]).reshape(M, n))

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PwlModel":
        return cls.from_text(Path(path).read_text())


def _lift(points):
    """Split fit samples into ``x~ = [x_1..x_{n-1}, 1]`` and targets ``x_n``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    Xt = np.hstack([P[:, :-1], np.ones((P.shape[0], 1))])
    return Xt, P[:, -1]


def evaluate(model: PwlModel, x) -> np.ndarray:
    """``max_k alpha_k . [x, 1]`` for one point or a batch of points."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    vals = np.max(np.hstack([X, np.ones((X.shape[0], 1))]) @ model.alpha.T, axis=1)
    return float(vals[0]) if single else vals


def objective(model: PwlModel, points) -> float:
    Xt, y = _lift(points)
    if Xt.shape[0] == 0:
        return 0.0
    gap = np.max(Xt @ model.alpha.T, axis=1) - y
    return float(gap @ gap)


def assign(model: PwlModel, points) -> np.ndarray:
    """Index of the maximising piece per sample (lowest index on ties)."""
    Xt, _ = _lift(points)
    return np.argmax(Xt @ model.alpha.T, axis=1)


def assigned_objective(model: PwlModel, points, assignment) -> float:
    """``sum_i (alpha_{k_i} . x~_i - y_i)^2`` for a fixed assignment."""
    Xt, y = _lift(points)
    gap = np.einsum("ij,ij->i", Xt, model.alpha[assignment]) - y
    return float(gap @ gap)


def max_violation(model: PwlModel, points) -> float:
    """Largest ``alpha_k . x~_i - y_i`` over all pieces and samples."""
    Xt, y = _lift(points)
    if Xt.shape[0] == 0:
        return -np.inf
    return float(np.max(Xt @ model.alpha.T - y[:, None]))


def _touch_from_below(alpha, Xt, y):
    """Shift offsets down so no piece lies above any sample."""
    alpha = alpha.copy()
    viol = np.max(Xt @ alpha.T - y[:, None], axis=0)
    alpha[:, -1] -= np.maximum(viol, 0.0)
    return alpha


def _bound_rows(points, bound):
    return _lift(points if bound is None else np.vstack([points, bound]))


def fit_qp(assignment, points, M: int, alpha0=None, prox: float = 1e-8,
           tol: float = 1e-8, bound=None) -> PwlModel:
    """Least squares over all pieces with the assignment frozen.

    Every piece must stay below every sample.  Pieces whose assigned samples
    do not determine them (rank-deficient Gram block, including empty
    pieces) get a proximal term ``prox * scale * ||alpha_k - alpha0_k||^2``
    so the QP stays strictly convex; it vanishes at a fixed point.
    """
    Xt, y = _lift(points)
    Bt, by = _bound_rows(points, bound)
    k_pts, n = Xt.shape
    assignment = np.asarray(assignment, dtype=int)
    if alpha0 is None:
        alpha0 = np.zeros((M, n))
        alpha0[:, -1] = y.min() if k_pts else 0.0
    alpha0 = np.asarray(alpha0, dtype=float)

    H = np.zeros((M * n, M * n))
    c = np.zeros(M * n)
    for k in range(M):
        sel = assignment == k
        Xk = Xt[sel]
        blk = slice(k * n, (k + 1) * n)
        H[blk, blk] = 2.0 * Xk.T @ Xk
        c[blk] = -2.0 * Xk.T @ y[sel]
    scale = max(1.0, float(np.max(np.abs(H))))
    for k in range(M):
        blk = slice(k * n, (k + 1) * n)
        ev = np.linalg.eigvalsh(H[blk, blk])
        if ev[0] <= 1e-9 * scale:
            rho = prox * scale
            H[blk, blk] += 2.0 * rho * np.eye(n)
            c[blk] -= 2.0 * rho * alpha0[k]
    G = np.kron(np.eye(M), Bt)
    g = np.tile(by, M)
    out = solve_qp(QpProblem(H, c, G, g), tol=tol, x0=alpha0.reshape(-1))
    if out.status is not Status.OPTIMAL:
        raise RuntimeError(f"fitting QP ended with status {out.status.value}")
    alpha = out.point.reshape(M, n)
    return PwlModel(_touch_from_below(alpha, Bt, by))


@dataclass
class DescentStep:
    model: PwlModel
    J: float
    converged: bool
    safeguard: bool


def descend_once(model0: PwlModel, points, depth: int = 30, prox: float = 1e-8,
                 bound=None) -> DescentStep:
    """One outer iteration: assign, solve the QP, and fall back to halving
    toward ``model0`` when the QP point does not lower ``J``."""
    J0 = objective(model0, points)
    asg = assign(model0, points)
    cand = fit_qp(asg, points, model0.M, model0.alpha, prox=prox, bound=bound)
    J1 = objective(cand, points)
    if J1 < J0:
        return DescentStep(cand, J1, False, False)
    a0, a1 = model0.alpha, cand.alpha
    theta = 1.0
    for _ in range(depth):
        theta *= 0.5
        trial = PwlModel(a0 + theta * (a1 - a0))
        Jt = objective(trial, points)
        if Jt < J0:
            return DescentStep(trial, Jt, False, True)
    return DescentStep(model0, J0, True, True)


def initialize(points, M: int, rng: Rng, bound=None) -> PwlModel:
    """Random slopes (scaled to the cloud's extent), offsets lowered until
    each piece touches the cloud from below."""
    if M < 1:
        raise ValueError("M must be >= 1")
    Xt, y = _lift(points)
    n = Xt.shape[1]
    span_x = np.ptp(Xt[:, :-1], axis=0) if Xt.shape[0] else np.ones(n - 1)
    span_y = float(np.ptp(y)) if y.size else 1.0
    span_y = span_y if span_y > 0 else 1.0
    ratio = np.where(span_x > 0, span_y / np.where(span_x > 0, span_x, 1.0), 0.0)
    alpha = np.zeros((M, n))
    alpha[:, :-1] = rng.uniform(-1.0, 1.0, size=(M, n - 1)) * ratio
    # start every piece above the cloud, then lower it onto the worst sample
    alpha[:, -1] = (np.max(y) + np.max(np.abs(Xt[:, :-1] @ alpha[:, :-1].T), axis=0) + 1.0) \
        if Xt.shape[0] else 0.0
    return PwlModel(_touch_from_below(alpha, *_bound_rows(points, bound)))


@dataclass
class FitConfig:
    M_candidates: list = field(default_factory=lambda: [3, 4, 5, 6])
    restarts: int = 20
    eps: float = 1e-6
    max_iter: int = 100
    depth: int = 30
    seed: int = 0
    prox: float = 1e-8
    tie_rtol: float = 1e-9

    def __post_init__(self):
        if self.tie_rtol < 0:
            raise ValueError("tie_rtol must be >= 0")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.M_candidates or min(self.M_candidates) < 1:
            raise ValueError("M_candidates must be positive counts")


@dataclass
class RestartResult:
    M: int
    restart: int
    model: PwlModel
    trace: list
    iterations: int
    safeguards: int

    @property
    def J(self) -> float:
        return self.trace[-1]


@dataclass
class FitReport:
    runs: list
    chosen: tuple
    J: float

    @property
    def safeguard_count(self) -> int:
        return sum(r.safeguards for r in self.runs)

    def summary_lines(self):
        lines = [f"chosen M={self.chosen[0]} restart={self.chosen[1]} J={self.J:.17g}"]
        for r in self.runs:
            lines.append(f"M={r.M} restart={r.restart} iterations={r.iterations} "
                         f"safeguards={r.safeguards} J={r.J:.17g}")
        return lines


def run_restart(points, M: int, rng: Rng, cfg: FitConfig, bound=None) -> RestartResult:
    model = initialize(points, M, rng, bound)
    trace = [objective(model, points)]
    safeguards = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        step = descend_once(model, points, cfg.depth, cfg.prox, bound)
        safeguards += step.safeguard
        delta = float(np.linalg.norm(step.model.alpha - model.alpha))
        model = step.model
        trace.append(step.J)
        if step.converged or delta <= cfg.eps:
            break
    return RestartResult(M, 0, model, trace, it, safeguards)


def _restart_job(args):
    points, bound, M, r, cfg = args
    res = run_restart(points, M, Rng(cfg.seed).child(M, r), cfg, bound)
    res.restart = r
    return res


def select(runs, rtol: float = 1e-9):
    """Best restart per ``M`` (lowest ``J``, earlier restart on exact ties),
    then the smallest ``M`` whose best ``J`` is within ``rtol`` (relative) of
    the overall minimum."""
    per_m = {}
    for r in runs:
        cur = per_m.get(r.M)
        if cur is None or r.J < cur.J:
            per_m[r.M] = r
    j_min = min(r.J for r in per_m.values())
    for M in sorted(per_m):
        if per_m[M].J <= j_min + rtol * abs(j_min):
            return per_m[M]
    raise AssertionError("unreachable")


def fit(points, cfg: FitConfig, workers: int = 1, bound=None):
    """Multi-start fit over every candidate piece count; lowest ``J`` wins,
    with near-ties (``cfg.tie_rtol``) going to the smaller ``M``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0 or points.size == 0:
        raise EmptyFitSet("no samples with non-positive last coordinate")
    if bound is not None:
        bound = np.atleast_2d(np.asarray(bound, dtype=float))
        bound = bound if bound.size else None
    jobs = [(points, bound, M, r, cfg)
            for M in sorted(set(cfg.M_candidates)) for r in range(cfg.restarts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(_restart_job, jobs))
    else:
        runs = [_restart_job(j) for j in jobs]
    best = select(runs, cfg.tie_rtol)
    logger.info("fit: best M=%d restart=%d J=%.6g", best.M, best.restart, best.J)
    return best.model, FitReport(runs, (best.M, best.restart), best.J)
