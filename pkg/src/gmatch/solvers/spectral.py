"""Spectral and random-walk relaxations: sm, mpm and rrwm.

All three maximize an affinity; the driver hands them the negated
non-positive problem, so the working cost matrix ``W`` is non-negative.
"""

from __future__ import annotations

import numpy as np

from ..lap import round_fractional
from ..model import Problem, dummy_labeling
from .base import SolverParams, Tracker
from .sinkhorn import candidate_sinkhorn


def _power(step, n: int, params: SolverParams, tracker: Tracker) -> np.ndarray:
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(params.power_cap):
        y = step(x)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            break
        y /= nrm
        done = np.linalg.norm(y - x) <= params.power_tol
        x = y
        if done or tracker.budget.exhausted():
            break
    return x


def _finish(problem: Problem, x: np.ndarray, tracker: Tracker) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    tracker.offer(round_fractional(problem, x))
    return x


def sm(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    """Spectral matching: leading eigenvector of W by power iteration, then rounding.

    Returns the final (clipped) iterate so callers can warm-start from it.
    """
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    w = problem.cost_matrix
    return _finish(problem, _power(lambda x: w @ x, n, params, tracker), tracker)


def _pooling(problem: Problem):
    """Grouping of directed edges by (source assignment, neighbor node)."""
    indptr, nbr, cost = problem.adjacency
    src = np.repeat(np.arange(problem.num_assignments), np.diff(indptr))
    half = cost / 2.0
    key = src * max(problem.num_nodes, 1) + problem.nodes[nbr]
    order = np.argsort(key, kind="stable")
    key, src, nbr, half = key[order], src[order], nbr[order], half[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]]) if len(key) else np.zeros(0, int)
    return src[starts], nbr, half, starts


def mpm(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    """Max-pooling matching: like sm, but each neighbor node contributes only its best label."""
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    diag = problem.unary
    group_src, nbr, half, starts = _pooling(problem)

    def step(x):
        out = diag * x
        if len(starts):
            pooled = np.maximum.reduceat(half * x[nbr], starts)
            np.add.at(out, group_src, pooled)
        return out

    return _finish(problem, _power(step, n, params, tracker), tracker)


def rrwm(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    """Reweighted random walk on the association graph with Sinkhorn-based reweighting.

    ``x <- alpha * w + (1 - alpha) * jump(w)`` for the walked vector
    ``w = P^T x`` (L1-normalized), ``P = W / d_max`` the affinity scaled by its
    largest row sum, and ``jump(w)`` = Sinkhorn(exp(beta * w / max w)),
    L1-normalized.
    """
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    w = problem.cost_matrix
    d_max = float(np.asarray(w.sum(axis=1)).max())
    # Dividing by the largest row sum gives a sub-stochastic walk whose lost
    # mass acts as an absorbing state; renormalization keeps ||x||_1 = 1.
    pt = (w.T / d_max).tocsr() if d_max > 0 else w.T.tocsr()
    alpha, beta = params.rrwm_alpha, params.rrwm_beta
    x = np.full(n, 1.0 / n)
    for it in range(params.rrwm_cap):
        walk = pt @ x
        mass = walk.sum()
        walk = walk / mass if mass > 0 else x
        top = walk.max()
        y, _ = candidate_sinkhorn(problem, beta * walk / top if top > 0 else np.zeros(n),
                                  params.sinkhorn_tol, params.sinkhorn_cap)
        total = y.sum()
        y = y / total if total > 0 else np.full(n, 1.0 / n)
        x_new = alpha * walk + (1.0 - alpha) * y
        x_new /= x_new.sum()
        done = np.linalg.norm(x_new - x) <= params.rrwm_tol
        x = x_new
        if it % 10 == 0:
            tracker.offer(round_fractional(problem, x))
        if done or tracker.budget.exhausted():
            break
    return _finish(problem, x, tracker)
