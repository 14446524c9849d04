"""Solver registry and the driver that prepares, times and records runs.

Each solver sees a working problem produced by the transforms its family
requires (bijective embedding, non-positive costs, negation for maximizers).
The transforms run before the clock starts; every candidate labeling is
pulled back and scored on the original problem.
"""

from __future__ import annotations

import time
from typing import Callable

from ..errors import PreconditionError
from ..lap import solve_ilap
from ..model import Problem, RunRecord, dummy_labeling
from ..transforms import Requirements, compose_pullback, prepare
from .base import Budget, SolverParams, Tracker
from .fusion import fm, fuse, greedy
from .linearization import fw, ga, ipfp, ipfp_from_sm
from .sinkhorn import sinkhorn, sinkhorn_log
from .spectral import mpm, rrwm, sm

_MAX = Requirements(bijective=True, maximize=True)
_MAX_NONPOS = Requirements(bijective=True, non_positive=True, maximize=True)
_NONE = Requirements()

REQUIREMENTS: dict[str, Requirements] = {
    "sm": _MAX_NONPOS,
    "mpm": _MAX_NONPOS,
    "ipfpu": _MAX,
    "ipfps": _MAX_NONPOS,
    "ga": _MAX,
    "rrwm": _MAX_NONPOS,
    "fw": _NONE,
    "fm": _NONE,
    "dual": _NONE,
    "fm+dual": _NONE,
    "lap": _NONE,
}


def _lap(problem: Problem, params: SolverParams, tracker: Tracker) -> None:
    if not problem.is_edge_free:
        raise PreconditionError("solver 'lap' requires a problem without edges")
    y, value = solve_ilap(problem)
    tracker.offer(y)
    tracker.offer_bound(value)


def _routines() -> dict[str, Callable[[Problem, SolverParams, Tracker], object]]:
    from ..dual import fm_dual, subgradient_ascend

    return {
        "sm": sm,
        "mpm": mpm,
        "ipfpu": ipfp,
        "ipfps": ipfp_from_sm,
        "ga": ga,
        "fw": fw,
        "rrwm": rrwm,
        "fm": fm,
        "dual": subgradient_ascend,
        "fm+dual": fm_dual,
        "lap": _lap,
    }


SOLVERS = tuple(REQUIREMENTS)


def solve(problem: Problem, solver: str, params: SolverParams | None = None,
          instance: str = "") -> RunRecord:
    """Run ``solver`` on ``problem`` and return its RunRecord.

    The timer starts right before the optimization routine; preparation and
    pullback are excluded.  Energies are always in the original sign.
    """
    if solver not in REQUIREMENTS:
        raise PreconditionError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    params = SolverParams() if params is None else params
    working, reports = prepare(problem, REQUIREMENTS[solver], assume_bijective=params.bijective)
    pullback = (lambda y: compose_pullback(reports, y)) if reports else None
    routine = _routines()[solver]

    budget = Budget(params.budget)
    tracker = Tracker(problem, budget, pullback)
    routine(working, params, tracker)
    if tracker.best_y is None:
        tracker.pullback = None
        tracker.offer(dummy_labeling(problem))
    total = budget.elapsed()

    bound = None if tracker.best_d == float("-inf") else float(tracker.best_d)
    return RunRecord(solver, instance, tracker.best_y, float(tracker.best_e), bound,
                     tracker.trace, params.to_dict(), total)


__all__ = [
    "REQUIREMENTS", "SOLVERS", "SolverParams", "Budget", "Tracker", "solve",
    "sm", "mpm", "ipfp", "ipfp_from_sm", "ga", "fw", "rrwm", "fm", "fuse", "greedy",
    "sinkhorn", "sinkhorn_log",
]
