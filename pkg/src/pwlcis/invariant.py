"""Polyhedral set assembly, invariance certification and the exact oracle."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import (EmptySetError, Polyhedron, _normalized, contains_many, is_empty,
                       project, remove_redundant, symmetric_pairs, vertices)
from .mpc import LinearSystem
from .pwlfit import PwlModel
from .solver import LpProblem, Status, solve_lp

logger = logging.getLogger(__name__)


def model_rows(model: PwlModel):
    """Each piece ``alpha . [x_1..x_{n-1}, 1] <= x_n`` as a row ``a x <= b``."""
    a = model.alpha.copy()
    H = np.hstack([a[:, :-1], -np.ones((model.M, 1))])
    return H, -a[:, -1]


def assemble(model: PwlModel, X: Polyhedron, reduce: bool = True) -> Polyhedron:
    """Stack the pieces, their negations and the state constraints.

    Redundant rows are removed in ``(a, b)`` / ``(-a, b)`` pairs so the
    result stays 0-symmetric.
    """
    Hp, q = model_rows(model)
    M = model.M
    xpairs = symmetric_pairs(X)
    if xpairs is None:
        raise ValueError("X is not 0-symmetric")
    H = np.vstack([Hp, -Hp, X.H])
    h = np.concatenate([q, q, X.h])
    pairs = np.concatenate([np.arange(M) + M, np.arange(M), xpairs + 2 * M])
    out = Polyhedron(H, h)
    if is_empty(out):
        raise EmptySetError("assembled set is empty")
    if reduce:
        out = remove_redundant(out, pairs=pairs)
    return out


@dataclass
class Certificate:
    vertices: np.ndarray
    slack: np.ndarray          # s*(v) per vertex; <= 0 means an input keeps A v + B u inside
    max_violation: float
    tol: float

    @property
    def certified(self) -> bool:
        return self.max_violation <= self.tol

    def to_csv(self) -> str:
        n = self.vertices.shape[1] if self.vertices.size else 0
        head = ",".join([f"x{i + 1}" for i in range(n)] + ["s"])
        rows = [",".join(f"{v:.17g}" for v in np.append(x, s))
                for x, s in zip(self.vertices, self.slack)]
        return "\n".join([head] + rows) + "\n"


def vertex_slack(omega: Polyhedron, sys: LinearSystem, U: Polyhedron, v) -> float:
    """``min_u max_i (H_i (A v + B u) - h_i)`` over admissible ``u`` (rows normalised)."""
    H, h = _normalized(omega.H, omega.h)
    nu = sys.nu
    m = H.shape[0]
    A_ub = np.vstack([
        np.hstack([H @ sys.B, -np.ones((m, 1))]),
        np.hstack([U.H, np.zeros((U.n_rows, 1))]),
    ])
    b_ub = np.concatenate([h - H @ (sys.A @ v), U.h])
    cost = np.zeros(nu + 1)
    cost[-1] = 1.0
    out = solve_lp(LpProblem(cost, A_ub, b_ub), tol=1e-10)
    if out.status is Status.INFEASIBLE:
        raise EmptySetError("input set is empty")
    if not out.ok:
        raise RuntimeError(f"certification LP ended with status {out.status.value}")
    return float(out.point[-1])


def certify_invariance(omega: Polyhedron, sys: LinearSystem, U: Polyhedron,
                       tol: float = 1e-8) -> Certificate:
    """Worst successor violation over the vertices of ``omega``.

    Admissible successors form a convex condition in ``x``, so checking the
    vertices is enough: interior points reuse the convex combination of the
    vertices' inputs.
    """
    V = vertices(omega)
    s = np.array([vertex_slack(omega, sys, U, v) for v in V])
    return Certificate(V, s, float(s.max()) if s.size else -np.inf, tol)


def pre(S: Polyhedron, sys: LinearSystem, U: Polyhedron, tol: float = 1e-9) -> Polyhedron:
    """States from which some admissible input reaches ``S`` in one step."""
    nx, nu = sys.nx, sys.nu
    lifted = Polyhedron(
        np.vstack([np.hstack([S.H @ sys.A, S.H @ sys.B]),
                   np.hstack([np.zeros((U.n_rows, nx)), U.H])]),
        np.concatenate([S.h, U.h]),
    )
    return project(lifted, list(range(nx)), tol)


def is_subset(P: Polyhedron, Q: Polyhedron, tol: float = 1e-9) -> bool:
    """``P ⊆ Q`` by maximising each row of ``Q`` over ``P``."""
    Hq, hq = _normalized(Q.H, Q.h)
    for a, b in zip(Hq, hq):
        out = solve_lp(LpProblem(-a, P.H, P.h))
        if out.status is Status.UNBOUNDED:
            return False
        if out.ok and -out.objective > b + tol:
            return False
    return True


@dataclass
class OracleResult:
    omega: Polyhedron
    iterations: int
    converged: bool


def maximal_ci_oracle(sys: LinearSystem, X: Polyhedron, U: Polyhedron,
                      max_iters: int = 50, tol: float = 1e-10) -> OracleResult:
    """Backward-reachability fixed point ``O_{t+1} = Pre(O_t) ∩ X`` from ``O_0 = X``."""
    omega = remove_redundant(X, tol)
    for t in range(1, max_iters + 1):
        nxt = remove_redundant(pre(omega, sys, U, tol).intersect(X), tol)
        logger.info("oracle iteration %d: %d rows", t, nxt.n_rows)
        if is_subset(omega, nxt, tol):
            return OracleResult(nxt, t, True)
        omega = nxt
    return OracleResult(omega, max_iters, False)


def containment_stats(omega: Polyhedron, points, tol: float = 1e-8) -> float:
    points = np.atleast_2d(points)
    if points.size == 0:
        return 1.0
    return float(np.mean(contains_many(omega, points, tol)))
