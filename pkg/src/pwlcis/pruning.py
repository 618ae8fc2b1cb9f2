"""Discard samples that are convex combinations of other samples.

A fitted lower bound that sits below every hull vertex also sits below every
point of the hull, so only hull vertices constrain the fitting problem.  A
cheap simplex sweep removes the bulk; an LP per remaining point finishes
the job exactly.
"""
from __future__ import annotations

import logging

import numpy as np

from .mpc import SampleSet, partition
from .numerics import rank
from .solver import LpProblem, Status, solve_lp

logger = logging.getLogger(__name__)


def _pick(P, first, order, usable, rank_tol):
    """Greedily complete ``first`` (a possibly empty index list) with points
    from ``order`` that are ``usable`` and keep the set linearly independent,
    so that together with the origin they span a simplex."""
    n = P.shape[1]
    chosen = list(first)
    for idx in order:
        if not usable[idx] or idx in chosen:
            continue
        trial = chosen + [idx]
        if rank(P[trial], rank_tol) == len(trial):
            chosen = trial
            if len(chosen) == n:
                return chosen
    return None


def _drop_inside(P, picked, alive, tol):
    V = P[picked]                                   # rows are simplex vertices
    live = np.flatnonzero(alive)
    # x = V' c with c >= 0, sum(c) <= 1  <=>  x inside conv(0, v_1..v_n)
    c = np.linalg.solve(V.T, P[live].T).T
    inside = np.all(c >= -tol, axis=1) & (c.sum(axis=1) <= 1.0 + tol)
    inside[np.isin(live, picked)] = False
    alive[live[inside]] = False


def prune_simplex(s: SampleSet, rank_tol: float = 1e-9, tol: float = 1e-9) -> SampleSet:
    """Remove points lying in simplices spanned by the origin and far samples.

    Sweep one: each pass takes the ``n`` largest-norm candidates that span a
    simplex with the origin, removes every other live point inside it and
    retires the picked vertices from candidacy (they stay in the output),
    until no simplex can be formed.  Sweep two lets every survivor lead one
    pass, completed by the largest-norm live points, which fans simplices
    around the origin in the directions sweep one skipped.
    """
    if not s.symmetric:
        raise ValueError("prune_simplex expects a symmetrized sample set")
    P = s.points
    N, n = P.shape
    norms = np.linalg.norm(P, axis=1)
    alive = np.ones(N, dtype=bool)
    # the origin is a simplex vertex already; zero samples are interior
    nonzero = norms > 1e-12
    order = np.argsort(-norms, kind="stable")
    order = order[nonzero[order]]
    candidate = nonzero.copy()
    passes = 0
    while True:
        picked = _pick(P, [], order, candidate & alive, rank_tol)
        if picked is None:
            break
        passes += 1
        _drop_inside(P, picked, alive, tol)
        candidate[picked] = False
    for lead in order:
        if not alive[lead]:
            continue
        picked = _pick(P, [lead], order, alive, rank_tol)
        if picked is None:
            continue
        passes += 1
        _drop_inside(P, picked, alive, tol)
    if np.count_nonzero(alive) == 0 or not np.any(norms[alive] > 1e-12):
        # everything collapsed onto the origin
        alive[np.argmax(norms)] = True
    out = SampleSet(P[alive], symmetric=True, stats=dict(s.stats))
    logger.info("simplex pruning: %d -> %d points in %d passes", N, len(out), passes)
    return out


def in_hull_of(points, x, tol: float = 1e-9) -> bool:
    """LP feasibility of ``x = sum_j lam_j p_j``, ``lam >= 0``, ``sum lam = 1``."""
    points = np.atleast_2d(points)
    k, n = points.shape
    if k == 0:
        return False
    eqA = np.vstack([points.T, np.ones((1, k))])
    eqB = np.append(x, 1.0)
    out = solve_lp(LpProblem(np.zeros(k), eqA=eqA, eqB=eqB, nonneg=True), tol=tol)
    return out.status is Status.OPTIMAL


def prune_exact(s: SampleSet, tol: float = 1e-9) -> SampleSet:
    """Keep exactly the vertices of the convex hull.

    Points are tested in index order against the current survivors, so of
    several coincident copies only the last one tested survives.
    """
    P = s.points
    N = P.shape[0]
    alive = np.ones(N, dtype=bool)
    for i in range(N):
        alive[i] = False
        if not in_hull_of(P[alive], P[i], tol):
            alive[i] = True
    return SampleSet(P[alive], symmetric=s.symmetric, stats=dict(s.stats))


def prune(s: SampleSet, zero_tol: float = 1e-12) -> SampleSet:
    if not s.symmetric:
        raise ValueError("prune expects a symmetrized sample set")
    out = prune_exact(prune_simplex(s))
    out = partition(out, zero_tol)
    out.stats = dict(s.stats, before_prune=len(s), after_prune=len(out))
    return out
