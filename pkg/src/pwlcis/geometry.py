"""Polyhedra in H-representation and small-dimension exact operations."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import rank
from .solver import LpProblem, Status, solve_lp

GEOM_TOL = 1e-9


class GeometryError(Exception):
    pass


class UnboundedError(GeometryError):
    pass


class DimensionTooLarge(GeometryError):
    pass


class RowBlowup(GeometryError):
    pass


class Degenerate(GeometryError):
    pass


class EmptySetError(GeometryError):
    pass


class Polyhedron:
    """The set ``{x : H x <= h}``."""

    def __init__(self, H, h, minimized: bool = False):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
        if H.shape[0] != h.shape[0]:
            raise ValueError("H and h row counts differ")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
            raise ValueError("non-finite polyhedron data")
        zero = ~np.any(H != 0.0, axis=1)
        if np.any(h[zero] < 0):
            raise ValueError("row 0 <= negative encodes the empty set trivially")
        self.H = H
        self.h = h
        self.minimized = minimized

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @property
    def n_rows(self) -> int:
        return self.H.shape[0]

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        n = lo.size
        I = np.eye(n)
        return cls(np.vstack([I, -I]), np.concatenate([hi, -lo]))

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        return Polyhedron(np.vstack([self.H, other.H]), np.concatenate([self.h, other.h]))

    def scaled(self, factor: float) -> "Polyhedron":
        """``factor * P`` (for ``factor > 0``)."""
        return Polyhedron(self.H, self.h * factor)

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        """True when every row ``(a, b)`` has a partner ``(-a, b)`` (up to scaling)."""
        return symmetric_pairs(self, tol) is not None

    def bounding_box(self):
        n = self.dim
        lo, hi = np.empty(n), np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            up = solve_lp(LpProblem(-e, self.H, self.h))
            dn = solve_lp(LpProblem(e, self.H, self.h))
            if up.status is Status.UNBOUNDED or dn.status is Status.UNBOUNDED:
                raise UnboundedError(f"unbounded along coordinate {i}")
            if not (up.ok and dn.ok):
                raise EmptySetError("polyhedron is empty")
            hi[i], lo[i] = -up.objective, dn.objective
        return lo, hi

    def __repr__(self):
        return f"Polyhedron(rows={self.n_rows}, dim={self.dim})"

    # -- text format: "m n", then m rows of H_i, h_i -------------------------
    def to_text(self) -> str:
        lines = [f"{self.n_rows} {self.dim}"]
        for a, b in zip(self.H, self.h):
            lines.append(" ".join(f"{v:.17g}" for v in np.append(a, b)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Polyhedron":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        m, n = int(rows[0][0]), int(rows[0][1])
        data = np.array([[float(v) for v in r] for r in rows[1:1 + m]]).reshape(m, n + 1)
        return cls(data[:, :n], data[:, n])

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Polyhedron":
        return cls.from_text(Path(path).read_text())


def _normalized(H, h):
    norms = np.linalg.norm(H, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return H / norms[:, None], h / norms


def symmetric_pairs(p: Polyhedron, tol: float = 1e-9):
    """Index of the ``(-a, b)`` partner of every row, or ``None``."""
    Hn, hn = _normalized(p.H, p.h)
    partner = np.empty(p.n_rows, dtype=int)
    for i in range(p.n_rows):
        d = np.max(np.abs(Hn + Hn[i]), axis=1)
        ok = np.flatnonzero((d <= tol) & (np.abs(hn - hn[i]) <= tol * max(1.0, abs(hn[i]))))
        if ok.size == 0:
            return None
        partner[i] = ok[0]
    return partner


def contains(p: Polyhedron, x, tol: float = GEOM_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dim,):
        raise ValueError("dimension mismatch")
    return bool(np.all(p.H @ x <= p.h + tol))


def contains_many(p: Polyhedron, X, tol: float = GEOM_TOL) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.all(X @ p.H.T <= p.h + tol, axis=1)


def is_empty(p: Polyhedron, tol: float = 1e-9) -> bool:
    out = solve_lp(LpProblem(np.zeros(p.dim), p.H, p.h), tol=tol)
    return out.status is Status.INFEASIBLE


def vertices(p: Polyhedron, tol: float = GEOM_TOL, max_dim: int = 6) -> np.ndarray:
    """Vertices by brute force over all ``n``-row subsets.

    Returns an array of shape ``(k, n)`` sorted lexicographically.
    """
    n = p.dim
    if n > max_dim:
        raise DimensionTooLarge(f"vertex enumeration limited to dimension {max_dim}")
    p.bounding_box()  # raises UnboundedError / EmptySetError
    Hn, hn = _normalized(p.H, p.h)
    m = Hn.shape[0]
    found = []
    combos = itertools.combinations(range(m), n)
    chunk = 4096
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        M = Hn[block]                      # (k, n, n)
        rhs = hn[block]                    # (k, n)
        # reject near-singular subsets before batching the solve
        sv = np.linalg.svd(M, compute_uv=False)
        good = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
        if not np.any(good):
            continue
        V = np.linalg.solve(M[good], rhs[good][..., None])[..., 0]
        feas = np.all(V @ Hn.T <= hn + tol, axis=1)
        found.append(V[feas])
    if not found:
        return np.zeros((0, n))
    V = np.vstack(found)
    if V.shape[0] == 0:
        return V
    return _unique_rows(V, tol * 10)


def _unique_rows(V, tol):
    order = np.lexsort(V.T[::-1])
    V = V[order]
    keep = [0]
    for i in range(1, V.shape[0]):
        if np.all(np.abs(V[i] - V[keep]) <= tol, axis=1).any():
            continue
        keep.append(i)
    return V[keep]


def remove_redundant(p: Polyhedron, tol: float = GEOM_TOL, pairs=None) -> Polyhedron:
    """Drop rows implied by the others.

    Row ``i`` survives iff maximising ``H_i x`` over the remaining kept rows
    exceeds ``h_i + tol`` (on normalised rows).  When ``pairs`` gives the
    ``(-a, b)`` partner of each row, a redundant row and its partner are
    dropped together, so a 0-symmetric input stays 0-symmetric.
    """
    m = p.n_rows
    if m == 0:
        return Polyhedron(p.H, p.h, minimized=True)
    Hn, hn = _normalized(p.H, p.h)
    # exact duplicates (after normalisation) first: cheap and keeps LPs small
    keep = np.ones(m, dtype=bool)
    _, first = np.unique(np.round(np.hstack([Hn, hn[:, None]]), 12), axis=0, return_index=True)
    if pairs is None:
        dup = np.ones(m, dtype=bool)
        dup[first] = False
        keep &= ~dup
    if is_empty(Polyhedron(Hn[keep], hn[keep])):
        return Polyhedron(p.H[keep], p.h[keep])
    done = np.zeros(m, dtype=bool)
    for i in range(m):
        if not keep[i] or done[i]:
            continue
        others = keep.copy()
        others[i] = False
        out = solve_lp(LpProblem(-Hn[i], Hn[others], hn[others]))
        redundant = out.ok and -out.objective <= hn[i] + tol
        if redundant:
            keep[i] = False
        if pairs is not None:
            # the partner's verdict follows by symmetry of the remaining rows
            done[pairs[i]] = True
            if redundant:
                keep[pairs[i]] = False
    return Polyhedron(p.H[keep], p.h[keep], minimized=True)


def project(p: Polyhedron, keep_dims, tol: float = GEOM_TOL, max_rows: int = 100_000) -> Polyhedron:
    """Fourier-Motzkin projection onto the coordinates ``keep_dims`` (in that order)."""
    keep_dims = [int(k) for k in keep_dims]
    n = p.dim
    drop = [d for d in range(n) if d not in keep_dims]
    H, h = _normalized(p.H, p.h)
    cols = list(range(n))
    for d in drop:
        j = cols.index(d)
        a = H[:, j]
        pos = np.flatnonzero(a > 1e-12)
        neg = np.flatnonzero(a < -1e-12)
        zer = np.flatnonzero(np.abs(a) <= 1e-12)
        n_new = zer.size + pos.size * neg.size
        if n_new > max_rows:
            raise RowBlowup(f"{n_new} rows while eliminating coordinate {d}")
        rows = [H[zer]]
        rhs = [h[zer]]
        if pos.size and neg.size:
            # combine every (positive, negative) pair so the coefficient cancels
            P = H[pos] / a[pos, None]
            N = H[neg] / -a[neg, None]
            rows.append((P[:, None, :] + N[None, :, :]).reshape(-1, H.shape[1]))
            rhs.append((h[pos] / a[pos])[:, None] + (h[neg] / -a[neg])[None, :])
        H = np.delete(np.vstack(rows), j, axis=1)
        h = np.concatenate([r.reshape(-1) for r in rhs])
        cols.pop(j)
        nz = np.any(np.abs(H) > 1e-12, axis=1)
        if np.any(h[~nz] < -tol):
            raise EmptySetError("projection of an empty set")
        H, h = _normalized(H[nz], h[nz])
        if H.shape[0]:
            H, h = _reduce(H, h, tol)
    order = [cols.index(k) for k in keep_dims]
    out = Polyhedron(H[:, order], h)
    return remove_redundant(out, tol)


def _reduce(H, h, tol):
    q = remove_redundant(Polyhedron(H, h), tol)
    return q.H, q.h


def hull_2d(points) -> np.ndarray:
    """Counter-clockwise convex hull vertices (monotone chain, collinear points dropped)."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError("hull_2d expects an (N, 2) array")
    pts = sorted(set(map(tuple, P)))
    if len(pts) < 3:
        raise Degenerate("fewer than three distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper = []
    for q in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise Degenerate("all points are collinear")
    return np.array(hull)


def polygon_area(vertices_ccw) -> float:
    V = np.asarray(vertices_ccw, dtype=float)
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_2d(p: Polyhedron, tol: float = GEOM_TOL) -> np.ndarray:
    """Vertices of a bounded 2D polyhedron in counter-clockwise order."""
    if p.dim != 2:
        raise ValueError("polygon_2d needs a 2D polyhedron")
    return hull_2d(vertices(p, tol))


@dataclass
class Simplex:
    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        n = V.shape[1]
        if V.shape[0] != n + 1:
            raise ValueError("a simplex in R^n needs n + 1 vertices")
        if rank(V[1:] - V[0], 1e-9) != n:
            raise Degenerate("simplex vertices are affinely dependent")
        self.vertices = V

    def barycentric(self, X) -> np.ndarray:
        """Barycentric coordinates of each row of ``X``; shape ``(k, n + 1)``."""
        V = self.vertices
        n = V.shape[1]
        M = np.vstack([V.T, np.ones(n + 1)])
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rhs = np.vstack([X.T, np.ones(X.shape[0])])
        return np.linalg.solve(M, rhs).T


def simplex_contains(s: Simplex, x, tol: float = GEOM_TOL) -> bool:
    lam = s.barycentric(np.asarray(x, dtype=float)[None, :])[0]
    return bool(np.all(lam >= -tol))
