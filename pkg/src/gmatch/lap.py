"""Exact linear assignment and the rounding step shared by continuous solvers."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InfeasibleError, PreconditionError
from .model import Labeling, Problem, as_fractional, labeling_from_ids
from .model import is_feasible as _is_feasible


def solve_lap(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Minimum-cost complete assignment of a square matrix.

    ``+inf`` entries are forbidden.  Backed by a shortest augmenting path
    solver (LAPJV variant); the result is deterministic for a given matrix.

    Returns:
        ``(perm, value)`` with row ``r`` assigned to column ``perm[r]``.

    Raises:
        InfeasibleError: no complete assignment with finite cost exists.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise PreconditionError("LAP cost matrix must be square")
    n = cost.shape[0]
    if n == 0:
        return (), 0.0
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise PreconditionError("LAP costs must be finite or +inf")
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        raise InfeasibleError("no finite complete assignment exists") from None
    return tuple(int(c) for c in cols), float(cost[rows, cols].sum())


def ilap_ids(problem: Problem, cost: np.ndarray) -> np.ndarray:
    """Assignment ids of a minimum-cost incomplete matching for per-candidate ``cost``.

    Only strictly negative costs can improve on leaving a node unassigned, so
    the problem is solved as a rectangular LAP over ``min(cost, 0)`` with
    forbidden pairs at zero, and zero-cost picks are dropped.
    """
    cost = np.asarray(cost, dtype=float)
    neg = cost < 0
    if not neg.any():
        return np.zeros(0, dtype=np.int64)
    ids = np.flatnonzero(neg)
    # Nodes and labels without a negative candidate cannot be matched profitably.
    rows, row_of = np.unique(problem.nodes[ids], return_inverse=True)
    cols, col_of = np.unique(problem.labels[ids], return_inverse=True)
    m = np.zeros((len(rows), len(cols)))
    m[row_of, col_of] = cost[ids]
    r, c = linear_sum_assignment(m)
    keep = m[r, c] < 0
    lookup = np.full((len(rows), len(cols)), -1, dtype=np.int64)
    lookup[row_of, col_of] = ids
    return np.sort(lookup[r[keep], c[keep]])


def solve_ilap(problem: Problem) -> tuple[Labeling, float]:
    """Optimal incomplete matching of an edge-free problem.

    Raises:
        PreconditionError: the problem has pairwise terms.
    """
    if not problem.is_edge_free:
        raise PreconditionError("solve_ilap requires a problem without edges")
    ids = ilap_ids(problem, problem.unary)
    return labeling_from_ids(problem, ids), float(problem.unary[ids].sum())


def round_fractional(problem: Problem, x) -> Labeling:
    """Feasible labeling of maximum total weight ``x`` (LAP on ``-x``).

    An integral feasible ``x`` is returned unchanged.
    """
    x = as_fractional(problem, x)
    if np.all((x == 0) | (x == 1)):
        y = labeling_from_ids(problem, np.flatnonzero(x))
        if _is_feasible(problem, y) and np.count_nonzero(x) == sum(s >= 0 for s in y):
            return y
    return labeling_from_ids(problem, ilap_ids(problem, -x))
