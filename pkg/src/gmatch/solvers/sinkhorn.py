"""Log-domain Sinkhorn balancing over the candidate pattern of a problem."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..model import Problem


def sinkhorn_log(logm: np.ndarray, tol: float = 1e-6, cap: int = 200) -> tuple[np.ndarray, int]:
    """Balance ``exp(logm)`` towards unit row and column sums.

    ``-inf`` entries stay zero.  Rows or columns without finite entries are
    left empty.  Stops once every non-empty row and column sums to within
    ``tol`` of one, or after ``cap`` row/column sweeps.  Scaling runs in the
    linear domain after a per-row shift and falls back to log-domain updates
    when a column underflows.

    Returns:
        ``(matrix, sweeps)``.
    """
    logm = np.array(logm, dtype=float)
    if logm.size == 0:
        return np.exp(logm), 0
    finite = np.isfinite(logm)
    live_r = finite.any(axis=1)
    live_c = finite.any(axis=0)
    top = np.where(live_r, np.max(np.where(finite, logm, -np.inf), axis=1), 0.0)
    m = np.exp(logm - top[:, None])
    if np.all(m.sum(axis=0)[live_c] > 1e-280):
        return _scale(m, live_r, tol, cap)
    return _scale_log(logm, live_r, tol, cap)


def _scale(m, live_r, tol, cap):
    # After a column step live columns sum to one, so only rows need checking.
    r = m.sum(axis=1)
    for sweep in range(1, cap + 1):
        m /= np.where(r > 0, r, 1.0)[:, None]
        c = m.sum(axis=0)
        m /= np.where(c > 0, c, 1.0)
        r = m.sum(axis=1)
        if np.abs(r[live_r] - 1.0).max(initial=0.0) <= tol:
            return m, sweep
    return m, cap


def _scale_log(logm, live_r, tol, cap):
    for sweep in range(1, cap + 1):
        r = logsumexp(logm, axis=1, keepdims=True)
        logm -= np.where(np.isfinite(r), r, 0.0)
        c = logsumexp(logm, axis=0, keepdims=True)
        logm -= np.where(np.isfinite(c), c, 0.0)
        r = np.exp(logsumexp(logm, axis=1))
        if np.abs(r[live_r] - 1.0).max(initial=0.0) <= tol:
            return np.exp(logm), sweep
    return np.exp(logm), cap


def sinkhorn(m: np.ndarray, tol: float = 1e-6, cap: int = 200) -> np.ndarray:
    """Doubly stochastic scaling of a non-negative matrix (zeros stay zero)."""
    m = np.asarray(m, dtype=float)
    with np.errstate(divide="ignore"):
        return sinkhorn_log(np.log(m), tol, cap)[0]


def candidate_sinkhorn(problem: Problem, logits: np.ndarray, tol: float = 1e-6,
                       cap: int = 200) -> tuple[np.ndarray, int]:
    """Sinkhorn on per-candidate logits laid out as a node x label matrix."""
    logm = np.full((problem.num_nodes, problem.num_labels), -np.inf)
    logm[problem.nodes, problem.labels] = logits
    m, sweeps = sinkhorn_log(logm, tol, cap)
    return m[problem.nodes, problem.labels], sweeps
