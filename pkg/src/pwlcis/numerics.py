"""Dense linear algebra helpers and seeded random streams.

Random streams use numpy's Philox counter-based bit generator keyed by a
``SeedSequence``.  Philox output is specified bit-for-bit by its algorithm,
so a ``(seed, key)`` pair replays the same draws on every platform.
"""
from __future__ import annotations

import numpy as np


class NotPositiveDefinite(ValueError):
    """Raised by :func:`cholesky` when a pivot falls below tolerance."""


def inf_norm(m) -> float:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=1)))


def cholesky(m, rel_tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Column-oriented outer-product factorization.  A pivot ``<= rel_tol * ||m||_inf``
    raises :class:`NotPositiveDefinite`; so does an asymmetric input.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("cholesky expects a square matrix")
    n = a.shape[0]
    scale = inf_norm(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > rel_tol * max(scale, 1.0):
        raise NotPositiveDefinite("matrix is not symmetric")
    piv_tol = rel_tol * scale
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= piv_tol:
            raise NotPositiveDefinite(f"pivot {j} is {d:.3e} (tolerance {piv_tol:.3e})")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def cho_solve(L, b) -> np.ndarray:
    """Solve ``L L^T x = b`` given the factor from :func:`cholesky`."""
    from scipy.linalg import solve_triangular

    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def rank(m, tol: float = 1e-9) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


class Rng:
    """Reproducible random stream identified by ``(seed, key)``.

    Children are derived from the identity, never from the current state, so
    ``rng.child(3)`` is the same stream no matter how much of ``rng`` has been
    consumed or which worker asks for it.
    """

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *idx: int) -> "Rng":
        return Rng(self.seed, self.key + tuple(idx))

    def uniform(self, lo, hi, size=None):
        return self._gen.uniform(lo, hi, size=size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"


def uniform_in_box(rng: Rng, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("lo must be <= hi componentwise")
    u = rng.uniform(0.0, 1.0, size=lo.shape)
    return lo + u * (hi - lo)
