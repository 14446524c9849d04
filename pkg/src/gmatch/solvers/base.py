"""Parameter bundle and the best-so-far tracker shared by all solvers."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np

from ..errors import PreconditionError
from ..model import Labeling, Problem, TracePoint, evaluate


_COUNTS = ("fm_k", "fm_generations", "dual_patience", "smooth_fuse_every")


@dataclass(frozen=True)
class SolverParams:
    """Tunable knobs for every solver; defaults are recorded in each RunRecord."""

    budget: float = 10.0
    seed: int = 0
    # Declares that only complete matchings matter on a square input, so the
    # driver may skip the gm_to_qap embedding for bijective-only solvers.
    bijective: bool = False
    # sm / mpm
    power_tol: float = 1e-8
    power_cap: int = 1000
    # ipfp
    ipfp_cap: int = 100
    # ga
    ga_gamma: float = 0.9
    ga_tmin_ratio: float = 1e-3
    ga_cap: int = 1000
    ga_tol: float = 1e-4
    sinkhorn_cap: int = 200
    sinkhorn_tol: float = 1e-6
    # fw
    fw_tol: float = 1e-6
    fw_cap: int = 500
    # rrwm
    rrwm_alpha: float = 0.2
    rrwm_beta: float = 30.0
    rrwm_tol: float = 1e-8
    rrwm_cap: int = 300
    # fm
    fm_epsilon: float = 0.2
    fm_k: int = 3
    fm_generations: int = 200
    # dual
    dual_cap: int = 1000
    dual_margin: float = 0.005
    dual_patience: int = 20
    gap_tol: float = 1e-3
    # fm+dual: smoothed dual, temperatures relative to the largest |cost|
    smooth_tau0: float = 0.1
    smooth_decay: float = 0.3
    smooth_tau_min: float = 1e-5
    smooth_stage_cap: int = 100
    smooth_fuse_every: int = 5

    def __post_init__(self):
        if not self.budget > 0:
            raise PreconditionError("budget must be positive")
        if not (self.smooth_tau0 > 0 and self.smooth_tau_min > 0 and 0 < self.smooth_decay < 1):
            raise PreconditionError("smoothing temperatures must be positive with decay in (0, 1)")
        for f in fields(self):
            if f.name.endswith("_cap") or f.name in _COUNTS:
                if getattr(self, f.name) < 1:
                    raise PreconditionError(f"{f.name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SolverParams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PreconditionError(f"unknown solver parameters: {sorted(unknown)}")
        return cls(**d)


class Budget:
    """Wall-clock budget checked cooperatively at iteration boundaries."""

    def __init__(self, seconds: float):
        self.seconds = seconds
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def exhausted(self) -> bool:
        return self.elapsed() >= self.seconds


class Tracker:
    """Collects best-so-far primal and dual values in the original problem's terms.

    ``pullback`` maps labelings of the working (transformed) problem to the
    original.  Trace points are appended only on improvement, with strictly
    increasing timestamps.
    """

    def __init__(self, problem: Problem, budget: Budget,
                 pullback: Callable[[Sequence[int]], Labeling] | None = None):
        self.problem = problem
        self.budget = budget
        self.pullback = pullback
        self.best_y: Labeling | None = None
        self.best_e = np.inf
        self.best_d = -np.inf
        self.trace: list[TracePoint] = []

    def _stamp(self) -> float:
        t = self.budget.elapsed()
        if self.trace and t <= self.trace[-1].elapsed:
            t = np.nextafter(self.trace[-1].elapsed, np.inf)
        return t

    def _record(self) -> None:
        bound = None if self.best_d == -np.inf else float(self.best_d)
        self.trace.append(TracePoint(self._stamp(), float(self.best_e), bound, self.best_y))

    def offer(self, y: Sequence[int], energy: float | None = None) -> bool:
        """Propose a labeling of the working problem; returns True on improvement."""
        y = tuple(y) if self.pullback is None else self.pullback(y)
        e = evaluate(self.problem, y) if energy is None else energy
        if e < self.best_e or self.best_y is None:
            self.best_e, self.best_y = e, y
            self._record()
            return True
        return False

    def offer_bound(self, d: float) -> bool:
        if d > self.best_d:
            self.best_d = d
            if self.best_y is not None:
                self._record()
            return True
        return False

    @property
    def gap(self) -> float:
        return self.best_e - self.best_d

    def certified(self, tol: float) -> bool:
        return self.best_y is not None and self.gap <= tol * abs(self.best_e) + 1e-9
