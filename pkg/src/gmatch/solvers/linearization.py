"""Methods built on linearizing f(x) = u.x + x'Px: ipfp, ga and fw.

``u`` holds the unaries as a linear term and ``P`` the half edge costs, so f
equals the objective on every binary x.
"""

from __future__ import annotations

import numpy as np

from ..lap import ilap_ids, round_fractional
from ..model import Problem, dummy_labeling, labeling_from_ids
from .base import SolverParams, Tracker
from .sinkhorn import candidate_sinkhorn
from .spectral import sm


def _gradient(problem: Problem, x: np.ndarray) -> np.ndarray:
    return problem.unary + 2.0 * (problem.pairwise_matrix @ x)


def _vertex(problem: Problem, cost: np.ndarray) -> np.ndarray:
    b = np.zeros(problem.num_assignments)
    b[ilap_ids(problem, cost)] = 1.0
    return b


def _step(problem: Problem, g: np.ndarray, d: np.ndarray, maximize: bool) -> float:
    """Exact line search of f(x + eta d) over eta in [0, 1]."""
    lin = float(g @ d)
    quad = float(d @ (problem.pairwise_matrix @ d))
    if maximize:
        lin, quad = -lin, -quad
    # Minimizing lin*eta + quad*eta^2; a flat segment moves fully.
    if quad > 0:
        return float(np.clip(-lin / (2.0 * quad), 0.0, 1.0))
    return 1.0 if lin + quad <= 0 else 0.0


def ipfp(problem: Problem, params: SolverParams, tracker: Tracker,
         x0: np.ndarray | None = None) -> np.ndarray:
    """Integer projected fixed point, maximizing the working affinity.

    Each step solves the LAP of the linearization for a binary direction
    ``b`` and moves along ``b - x`` with an exact line search; the best binary
    iterate is kept by the tracker.  ``x0`` defaults to ``1/sqrt(N)`` on all
    candidates.
    """
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    x = np.full(n, 1.0 / np.sqrt(n)) if x0 is None else np.asarray(x0, dtype=float).copy()
    tracker.offer(round_fractional(problem, np.clip(x, 0.0, None)))
    prev = None
    for _ in range(params.ipfp_cap):
        g = _gradient(problem, x)
        b = _vertex(problem, -g)
        tracker.offer(labeling_from_ids(problem, np.flatnonzero(b)))
        if prev is not None and np.array_equal(b, prev):
            break
        prev = b
        d = b - x
        x = x + _step(problem, g, d, maximize=True) * d
        if tracker.budget.exhausted():
            break
    return x


def ipfp_from_sm(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    return ipfp(problem, params, tracker, x0=sm(problem, params, tracker))


def ga(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    """Graduated assignment: Sinkhorn-softened LAP of the gradient under annealing.

    Maximizes the working affinity; temperature starts at the largest
    absolute cost and shrinks geometrically.  Stops early once an annealing
    step moves no entry by more than ``ga_tol``.
    """
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    scale = np.concatenate([np.abs(problem.unary), np.abs(problem.edge_cost) / 2.0])
    t0 = float(scale.max()) if scale.size and scale.max() > 0 else 1.0
    t_min = params.ga_tmin_ratio * t0
    x, _ = candidate_sinkhorn(problem, np.zeros(n), params.sinkhorn_tol, params.sinkhorn_cap)
    t = t0
    for _ in range(params.ga_cap):
        if t < t_min:
            break
        g = _gradient(problem, x)
        x_new, _ = candidate_sinkhorn(problem, g / t, params.sinkhorn_tol, params.sinkhorn_cap)
        moved = float(np.abs(x_new - x).max())
        x = x_new
        tracker.offer(round_fractional(problem, x))
        t *= params.ga_gamma
        if moved <= params.ga_tol or tracker.budget.exhausted():
            break
    return x


def fw(problem: Problem, params: SolverParams, tracker: Tracker) -> np.ndarray:
    """Frank-Wolfe over the doubly semi-stochastic set, minimizing the objective.

    Starts from the iLAP optimum of the unaries; every LAP vertex is offered
    as a primal candidate.  Stops when the duality-gap estimate ``g.(x - b)``
    falls below ``fw_tol`` (relative to max(1, |f(x)|)).
    """
    n = problem.num_assignments
    if n == 0:
        tracker.offer(dummy_labeling(problem))
        return np.zeros(0)
    x = _vertex(problem, problem.unary)
    tracker.offer(labeling_from_ids(problem, np.flatnonzero(x)))
    for _ in range(params.fw_cap):
        g = _gradient(problem, x)
        b = _vertex(problem, g)
        tracker.offer(labeling_from_ids(problem, np.flatnonzero(b)))
        gap = float(g @ (x - b))
        f = float(problem.unary @ x + x @ (problem.pairwise_matrix @ x))
        if gap <= params.fw_tol * max(1.0, abs(f)):
            break
        d = b - x
        x = x + _step(problem, g, d, maximize=False) * d
        if tracker.budget.exhausted():
            break
    return x
