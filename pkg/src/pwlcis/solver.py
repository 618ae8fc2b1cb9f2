"""Dense LP and strictly convex QP solvers.

``solve_lp`` is a two-phase tableau simplex (Dantzig pricing, falling back to
Bland's rule on degenerate stalls).  ``solve_qp`` is a primal active-set
method working in the range space of a Cholesky factor of the Hessian; it
starts from a caller-supplied feasible point or from the point returned by a
phase-one LP.

Both return a :class:`SolveOutcome` rather than raising on infeasibility,
which keeps the callers (closed-loop simulation, pruning, certification) in
charge of what an infeasible subproblem means for them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .numerics import cholesky, inf_norm


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass
class SolveOutcome:
    status: Status
    point: np.ndarray
    objective: float
    kkt_residual: float = np.inf
    iterations: int = 0
    #: multipliers of the inequality rows (>= 0 at an optimum)
    ineq_dual: np.ndarray = field(default=None, repr=False)
    #: multipliers of the equality rows (LP only)
    eq_dual: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _as_matrix(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, ncols))
    return np.atleast_2d(a)


def _as_vector(b, n):
    if b is None:
        return np.zeros(n)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclass
class QpProblem:
    """``min 1/2 x'Hx + c'x  s.t.  ineqA x <= ineqB``."""

    hessian: np.ndarray
    linear: np.ndarray
    ineqA: np.ndarray = None
    ineqB: np.ndarray = None

    def __post_init__(self):
        self.hessian = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        n = self.hessian.shape[0]
        if self.hessian.shape != (n, n):
            raise ValueError("hessian must be square")
        self.linear = _as_vector(self.linear, n)
        self.ineqA = _as_matrix(self.ineqA, n)
        self.ineqB = _as_vector(self.ineqB, self.ineqA.shape[0])
        if self.linear.shape != (n,) or self.ineqA.shape[1] != n:
            raise ValueError("inconsistent QP dimensions")
        if self.ineqB.shape != (self.ineqA.shape[0],):
            raise ValueError("ineqB length must match ineqA rows")
        scale = max(inf_norm(self.hessian), 1.0)
        if np.max(np.abs(self.hessian - self.hessian.T), initial=0.0) > 1e-12 * scale:
            raise ValueError("hessian is not symmetric")

    @property
    def n(self):
        return self.hessian.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.hessian @ x + self.linear @ x)


@dataclass
class LpProblem:
    """``min c'x  s.t.  ineqA x <= ineqB, eqA x = eqB``.

    Variables are free unless flagged in ``nonneg``; flagging avoids paying a
    constraint row per sign condition.
    """

    cost: np.ndarray
    ineqA: np.ndarray = None
    ineqB: np.ndarray = None
    eqA: np.ndarray = None
    eqB: np.ndarray = None
    nonneg: np.ndarray = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).reshape(-1)
        n = self.cost.shape[0]
        self.ineqA = _as_matrix(self.ineqA, n)
        self.ineqB = _as_vector(self.ineqB, self.ineqA.shape[0])
        self.eqA = _as_matrix(self.eqA, n)
        self.eqB = _as_vector(self.eqB, self.eqA.shape[0])
        if self.nonneg is None:
            self.nonneg = np.zeros(n, dtype=bool)
        else:
            self.nonneg = np.broadcast_to(np.asarray(self.nonneg, dtype=bool), (n,)).copy()
        if self.ineqA.shape[1] != n or self.eqA.shape[1] != n:
            raise ValueError("constraint matrices must have one column per variable")
        if self.ineqB.shape != (self.ineqA.shape[0],) or self.eqB.shape != (self.eqA.shape[0],):
            raise ValueError("right-hand sides must match constraint rows")

    @property
    def n(self):
        return self.cost.shape[0]


# ---------------------------------------------------------------------------
# LP: two-phase tableau simplex on  min c'z  s.t.  A z = b, z >= 0
# ---------------------------------------------------------------------------

_PIV_TOL = 1e-11
_STALL_LIMIT = 50


def _simplex_iterate(T, basis, ncols_allowed, opt_tol, max_iter, it0):
    """Pivot ``T`` (last row = reduced costs) to optimality over columns
    ``< ncols_allowed``.  Returns ``(status, iterations)``."""
    m = T.shape[0] - 1
    it = it0
    degenerate_run = 0
    while True:
        d = T[-1, :ncols_allowed]
        neg = np.flatnonzero(d < -opt_tol)
        if neg.size == 0:
            return Status.OPTIMAL, it
        if it >= max_iter:
            return Status.ITER_LIMIT, it
        bland = degenerate_run >= _STALL_LIMIT
        j = int(neg[0]) if bland else int(neg[np.argmin(d[neg])])
        col = T[:m, j]
        pos = np.flatnonzero(col > _PIV_TOL)
        if pos.size == 0:
            return Status.UNBOUNDED, it
        ratios = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * max(1.0, abs(rmin))]
        # lowest basic-variable index among ties (Bland's leaving rule)
        r = int(ties[np.argmin(basis[ties])])
        degenerate_run = degenerate_run + 1 if T[r, -1] <= 1e-12 else 0
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def _pivot(T, r, j):
    T[r] /= T[r, j]
    f = T[:, j].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])


def _standard_form(p: LpProblem):
    """Map to ``A z = b, z >= 0``; returns data plus recovery info."""
    n = p.n
    free = ~p.nonneg
    # columns: original vars (x+ or x), negative parts of free vars, slacks
    neg_cols = np.flatnonzero(free)
    mi, me = p.ineqA.shape[0], p.eqA.shape[0]
    nz = n + neg_cols.size + mi
    A = np.zeros((mi + me, nz))
    A[:mi, :n] = p.ineqA
    A[mi:, :n] = p.eqA
    A[:mi, n:n + neg_cols.size] = -p.ineqA[:, neg_cols]
    A[mi:, n:n + neg_cols.size] = -p.eqA[:, neg_cols]
    A[np.arange(mi), n + neg_cols.size + np.arange(mi)] = 1.0
    b = np.concatenate([p.ineqB, p.eqB])
    c = np.zeros(nz)
    c[:n] = p.cost
    c[n:n + neg_cols.size] = -p.cost[neg_cols]
    return A, b, c, neg_cols


def _recover_x(z, n, neg_cols):
    x = z[:n].copy()
    x[neg_cols] -= z[n:n + neg_cols.size]
    return x


def solve_lp(p: LpProblem, tol: float = 1e-8, max_iter: int = None) -> SolveOutcome:
    """Solve an LP.

    ``kkt_residual`` is the largest of primal infeasibility, dual
    infeasibility and complementarity, each relative to
    ``max(1, ||A||, ||b||, ||c||)`` of the standard-form data.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b, c, neg_cols = _standard_form(p)
    m, nz = A.shape
    n = p.n
    if max_iter is None:
        max_iter = 10 * (n + m) + 50
    scale = max(1.0, inf_norm(A), float(np.max(np.abs(b), initial=0.0)),
                float(np.max(np.abs(c), initial=0.0)))
    opt_tol = 1e-12 * scale

    if m == 0:
        if np.any(c < -opt_tol):
            return SolveOutcome(Status.UNBOUNDED, np.zeros(n), -np.inf, iterations=0)
        return SolveOutcome(Status.OPTIMAL, np.zeros(n), 0.0, 0.0, 0,
                            np.zeros(0), np.zeros(0))

    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    mi = p.ineqA.shape[0]
    slack0 = n + neg_cols.size
    # rows whose own slack is a valid starting basic variable
    slack_ok = np.zeros(m, dtype=bool)
    slack_ok[:mi] = sign[:mi] > 0
    art_rows = np.flatnonzero(~slack_ok)
    na = art_rows.size

    T = np.zeros((m + 1, nz + na + 1))
    T[:m, :nz] = As
    T[art_rows, nz + np.arange(na)] = 1.0
    T[:m, -1] = bs
    basis = np.empty(m, dtype=int)
    basis[slack_ok] = slack0 + np.flatnonzero(slack_ok)
    basis[art_rows] = nz + np.arange(na)

    iters = 0
    kept = np.arange(m)
    if na:
        # phase one: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, nz:nz + na] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        status, iters = _simplex_iterate(T, basis, nz + na, opt_tol, max_iter, 0)
        if status is Status.ITER_LIMIT:
            return SolveOutcome(Status.ITER_LIMIT, np.zeros(n), np.nan, iterations=iters)
        infeas = -T[-1, -1]
        if infeas > tol * max(1.0, float(np.max(np.abs(b)))):
            return SolveOutcome(Status.INFEASIBLE, np.zeros(n), np.nan, iterations=iters)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nz:
                row = T[r, :nz]
                cand = np.flatnonzero(np.abs(row) > 1e-9)
                if cand.size:
                    j = int(cand[0])
                    _pivot(T, r, j)
                    basis[r] = j
                else:
                    keep[r] = False  # redundant equality row
        if not keep.all():
            kept = kept[keep]
            T = np.vstack([T[:m][keep], T[-1:]])
            basis = basis[keep]
            As, bs = As[keep], bs[keep]
            A, b = A[keep], b[keep]
            m = basis.size
        T = np.hstack([T[:, :nz], T[:, -1:]])

    # phase two
    T[-1, :] = 0.0
    T[-1, :nz] = c
    T[-1] -= c[basis] @ T[:m]
    status, iters = _simplex_iterate(T, basis, nz, opt_tol, max_iter, iters)
    z = np.zeros(nz)
    z[basis] = T[:m, -1]
    if status is Status.UNBOUNDED:
        return SolveOutcome(Status.UNBOUNDED, _recover_x(z, n, neg_cols), -np.inf, iterations=iters)
    if status is Status.ITER_LIMIT:
        x = _recover_x(z, n, neg_cols)
        return SolveOutcome(Status.ITER_LIMIT, x, float(p.cost @ x), iterations=iters)

    # refine from the final basis against the untouched data
    AB = A[:, basis]
    try:
        zB = np.linalg.solve(AB, b)
        y = np.linalg.solve(AB.T, c[basis])
    except np.linalg.LinAlgError:
        zB, y = z[basis], np.linalg.lstsq(AB.T, c[basis], rcond=None)[0]
    if np.min(zB, initial=0.0) >= -tol:
        z = np.zeros(nz)
        z[basis] = np.maximum(zB, 0.0)
    d = c - A.T @ y
    primal = max(float(np.max(np.abs(A @ z - b), initial=0.0)), float(np.max(-z, initial=0.0)))
    dual = float(np.max(-d, initial=0.0))
    comp = float(np.max(np.abs(d * z), initial=0.0))
    kkt = max(primal, dual, comp) / scale
    x = _recover_x(z, n, neg_cols)

    # multipliers in the convention  c + ineqA' mu + eqA' nu = 0, mu >= 0
    full_y = np.zeros(mi + p.eqA.shape[0])
    full_y[kept] = y
    mu = -full_y[:mi]
    nu = -full_y[mi:]
    return SolveOutcome(Status.OPTIMAL, x, float(p.cost @ x), kkt, iters, mu, nu)


# ---------------------------------------------------------------------------
# QP: primal active set
# ---------------------------------------------------------------------------

def _phase_one(G, g, tol):
    """A point with ``G x <= g + tol`` (rows normalised), or ``None``."""
    m, n = G.shape
    # min t  s.t.  G x - t <= g,  t >= -1
    A = np.zeros((m + 1, n + 1))
    A[:m, :n] = G
    A[:m, n] = -1.0
    A[m, n] = -1.0
    b = np.concatenate([g, [1.0]])
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    out = solve_lp(LpProblem(cost, A, b), tol=tol)
    if out.status is not Status.OPTIMAL or out.point[n] > tol:
        return None, out
    return out.point[:n], out


def qp_kkt_residual(p: QpProblem, x, lam) -> float:
    """Independent KKT check for ``min 1/2 x'Hx + c'x, Gx <= g``.

    Stationarity and complementarity are divided by ``max(1, ||H||, ||c||)``;
    primal violation is measured on row-normalised constraints.
    """
    H, c, G, g = p.hessian, p.linear, p.ineqA, p.ineqB
    scale = max(1.0, inf_norm(H), float(np.max(np.abs(c), initial=0.0)))
    lam = np.zeros(G.shape[0]) if lam is None else np.asarray(lam, dtype=float)
    norms = np.linalg.norm(G, axis=1) if G.size else np.zeros(0)
    norms = np.where(norms > 0, norms, 1.0)
    viol = (G @ x - g) / norms if G.size else np.zeros(0)
    primal = float(np.max(viol, initial=0.0))
    stat = float(np.max(np.abs(H @ x + c + G.T @ lam), initial=0.0)) if G.size else \
        float(np.max(np.abs(H @ x + c), initial=0.0))
    dual = float(np.max(-lam * norms, initial=0.0))
    comp = float(np.max(np.abs(lam * norms * viol), initial=0.0))
    return max(primal, stat / scale, dual / scale, comp / scale)


def solve_qp(p: QpProblem, tol: float = 1e-8, max_iter: int = None, x0=None) -> SolveOutcome:
    """Minimise a strictly convex QP by a primal active-set method.

    ``x0`` warm-starts the iteration when it is feasible within ``tol``;
    otherwise a phase-one LP supplies the starting point.  Ties among blocking
    constraints or among negative multipliers go to the lowest row index.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H, c = p.hessian, p.linear
    n = p.n
    G_raw, g_raw = p.ineqA, p.ineqB
    m_raw = G_raw.shape[0]
    if max_iter is None:
        max_iter = 10 * (n + m_raw)

    norms = np.linalg.norm(G_raw, axis=1) if m_raw else np.zeros(0)
    zero = norms <= 1e-14
    if np.any(g_raw[zero] < -tol):
        return SolveOutcome(Status.INFEASIBLE, np.zeros(n), np.nan)
    rows = np.flatnonzero(~zero)
    G = G_raw[rows] / norms[rows, None]
    g = g_raw[rows] / norms[rows]
    m = rows.size

    L = cholesky(H)
    scale = max(1.0, inf_norm(H), float(np.max(np.abs(c), initial=0.0)))

    x = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if m == 0 or np.max(G @ x0 - g) <= tol:
            x = x0.copy()
    if x is None:
        if m == 0:
            x = np.zeros(n)
        else:
            x, _ = _phase_one(G, g, tol)
            if x is None:
                return SolveOutcome(Status.INFEASIBLE, np.zeros(n), np.nan)

    W: list[int] = []
    in_W = np.zeros(m, dtype=bool)
    lam_W = np.zeros(0)
    zero_steps = 0
    at_min = False          # x minimises the objective on the current working set
    status = Status.ITER_LIMIT
    it = 0
    for it in range(1, max_iter + 1):
        grad = H @ x + c
        zg = solve_triangular(L, grad, lower=True, check_finite=False)
        if W:
            Y = solve_triangular(L, G[W].T, lower=True, check_finite=False)
            lam_W = np.linalg.lstsq(Y, -zg, rcond=None)[0]
            w = zg + Y @ lam_W
        else:
            lam_W = np.zeros(0)
            w = zg
        pstep = -solve_triangular(L.T, w, lower=False, check_finite=False)

        if at_min or np.max(np.abs(pstep)) <= 1e-12 * (1.0 + np.max(np.abs(x))):
            at_min = False
            if not W or lam_W.min() >= -tol * scale * 1e-2:
                status = Status.OPTIMAL
                break
            neg = np.flatnonzero(lam_W < -tol * scale * 1e-2)
            if zero_steps > _STALL_LIMIT:
                k = int(neg[np.argmin(np.asarray(W)[neg])])
            else:
                k = int(neg[np.argmin(lam_W[neg])])
            in_W[W[k]] = False
            del W[k]
            continue

        Gp = G @ pstep
        cand = np.flatnonzero((Gp > 1e-12) & ~in_W)
        alpha = 1.0
        block = -1
        if cand.size:
            slack = np.maximum(g[cand] - G[cand] @ x, 0.0)
            ratios = slack / Gp[cand]
            r = ratios.min()
            if r < 1.0:
                alpha = r
                ties = cand[ratios <= r + 1e-14]
                block = int(ties.min())
        x = x + alpha * pstep
        zero_steps = zero_steps + 1 if alpha <= 1e-14 else 0
        if block >= 0:
            W.append(block)
            in_W[block] = True
        else:
            at_min = True

    lam = np.zeros(m)
    if W:
        if status is Status.OPTIMAL:
            lam[W] = np.maximum(lam_W, 0.0)
        else:
            # the loop may have grown W after the last multiplier estimate
            zg = solve_triangular(L, H @ x + c, lower=True, check_finite=False)
            Y = solve_triangular(L, G[W].T, lower=True, check_finite=False)
            lam[W] = np.linalg.lstsq(Y, -zg, rcond=None)[0]
    lam_raw = np.zeros(m_raw)
    lam_raw[rows] = lam / norms[rows]
    kkt = qp_kkt_residual(p, x, lam_raw)
    if status is Status.OPTIMAL and kkt > tol:
        # polish: re-solve the equality-constrained problem on the working set
        x, lam_raw, kkt = _polish(p, x, lam_raw, W, rows, kkt)
    return SolveOutcome(status, x, p.value(x), kkt, it, lam_raw)


def _polish(p, x, lam_old, W, rows, kkt):
    H, c = p.hessian, p.linear
    n = p.n
    Wr = rows[W] if W else np.zeros(0, dtype=int)
    A = p.ineqA[Wr]
    k = A.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-c, p.ineqB[Wr]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return x, lam_old, kkt
    lam = np.zeros(p.ineqA.shape[0])
    lam[Wr] = sol[n:]
    new = qp_kkt_residual(p, sol[:n], lam)
    if new < kkt:
        return sol[:n], lam, new
    return x, lam_old, kkt
