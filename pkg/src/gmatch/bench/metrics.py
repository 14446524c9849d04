"""Fixed-time tables, fixed-target times, performance profiles and accuracy."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import PreconditionError
from ..model import DUMMY, RunRecord

DEFAULT_BUDGETS = (1.0, 10.0, 100.0, 300.0)


def within_tolerance(energy: float, reference: float, tol: float = 1e-3) -> bool:
    """``E <= ref + tol * |ref|`` with an absolute floor of 1e-9 (so ref = 0 means exact)."""
    return energy <= reference + tol * abs(reference) + 1e-9


def accuracy(labeling: Sequence[int], truth: Mapping[int, int]) -> float:
    """Correctly assigned nodes over nodes with a ground-truth label."""
    if not truth:
        raise PreconditionError("accuracy needs a non-empty ground truth")
    correct = sum(1 for i, s in truth.items() if i < len(labeling) and labeling[i] == s)
    return correct / len(truth)


def state_at(record: RunRecord, t: float):
    """Last trace point with ``elapsed <= t``, or None if there was no solution yet."""
    best = None
    for point in record.trace:
        if point.elapsed > t:
            break
        best = point
    return best


@dataclass
class BenchmarkSuite:
    """Named problems plus optional ground truth and known optima."""

    problems: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)
    optima: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, gt in self.truth.items():
            p = self.problems[name]
            for i, s in gt.items():
                if s == DUMMY or p.assignment_id(i, s) is None:
                    raise PreconditionError(f"{name}: ground truth ({i}, {s}) is not a candidate")

    @property
    def names(self) -> list[str]:
        return list(self.problems)


def _group(records: Iterable[RunRecord]) -> dict[tuple[str, str], list[RunRecord]]:
    out: dict[tuple[str, str], list[RunRecord]] = defaultdict(list)
    for r in records:
        out[r.solver, r.instance].append(r)
    return out


def fixed_time_report(suite: BenchmarkSuite, records: Iterable[RunRecord],
                      budgets: Sequence[float] = DEFAULT_BUDGETS, tol: float = 1e-3) -> list[dict]:
    """One row per (solver, budget) with opt%, mean E, mean D and mean accuracy.

    Over several trials of a cell the best state reached by the budget counts
    (the fastest trial).  Means are None, printed as ``---*``, when some
    instance has no solution within the budget; ``opt_pct`` is over
    instances with a known optimum and None if there are none.
    """
    groups = _group(records)
    solvers = list(dict.fromkeys(s for s, _ in groups))
    rows = []
    for solver in solvers:
        for budget in budgets:
            es, ds, accs, n_opt, missing = [], [], [], 0, 0
            for name in suite.names:
                states = [state_at(r, budget) for r in groups.get((solver, name), [])]
                states = [s for s in states if s is not None]
                if not states:
                    missing += 1
                    continue
                point = min(states, key=lambda s: s.energy)
                es.append(point.energy)
                bounds = [s.bound for s in states if s.bound is not None]
                ds.append(max(bounds) if bounds else None)
                if name in suite.optima and within_tolerance(point.energy, suite.optima[name], tol):
                    n_opt += 1
                if name in suite.truth:
                    accs.append(accuracy(point.labeling, suite.truth[name]))
            known = sum(1 for name in suite.names if name in suite.optima)
            complete = missing == 0 and len(es) > 0
            rows.append({
                "solver": solver,
                "budget": budget,
                "instances": len(suite.names),
                "no_solution": missing,
                "opt_pct": 100.0 * n_opt / known if known else None,
                "mean_E": float(np.mean(es)) if complete else None,
                "mean_D": float(np.mean(ds)) if complete and all(d is not None for d in ds) else None,
                "mean_acc": float(np.mean(accs)) if complete and accs else None,
            })
    return rows


def write_fixed_time_csv(path, rows: list[dict]) -> None:
    cols = ["solver", "budget", "instances", "no_solution", "opt_pct", "mean_E", "mean_D", "mean_acc"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow(["---*" if row[c] is None and c in ("mean_E", "mean_D", "mean_acc")
                        and row["no_solution"] else "" if row[c] is None else row[c] for c in cols])


@dataclass
class ProfileTable:
    """Time to reach the reference optimum per (solver, instance); inf if never."""

    solvers: list[str]
    instances: list[str]
    times: dict[tuple[str, str], float]
    reference: dict[str, float]

    def ratios(self) -> dict[tuple[str, str], float]:
        """``r_s(p) = t_s(p) / min_s t_s(p)``; inf where unsolved or nobody solved p."""
        out = {}
        for p in self.instances:
            ts = [self.times.get((s, p), math.inf) for s in self.solvers]
            best = min(ts, default=math.inf)
            for s, t in zip(self.solvers, ts):
                if math.isinf(t):
                    out[s, p] = math.inf
                elif t == best:
                    out[s, p] = 1.0
                else:
                    out[s, p] = t / best if best > 0 else math.inf
        return out


def fixed_target_times(suite_or_names, records: Iterable[RunRecord], tol: float = 1e-3,
                       optima: Mapping[str, float] | None = None) -> ProfileTable:
    """First trace time within ``tol`` of the reference, minimized over trials.

    The reference is the known optimum where given, otherwise the best E of
    any solver on that instance.
    """
    if isinstance(suite_or_names, BenchmarkSuite):
        names = suite_or_names.names
        optima = dict(suite_or_names.optima) if optima is None else dict(optima)
    else:
        names = list(suite_or_names)
        optima = {} if optima is None else dict(optima)
    groups = _group(records)
    solvers = list(dict.fromkeys(s for s, _ in groups))
    reference = {}
    for name in names:
        if name in optima:
            reference[name] = float(optima[name])
        else:
            es = [r.energy for (s, p), rs in groups.items() if p == name for r in rs]
            reference[name] = min(es, default=math.inf)
    times = {}
    for (solver, name), rs in groups.items():
        if name not in reference:
            continue
        best = math.inf
        for r in rs:
            for point in r.trace:
                if within_tolerance(point.energy, reference[name], tol):
                    best = min(best, point.elapsed)
                    break
        times[solver, name] = best
    return ProfileTable(solvers, names, times, reference)


def performance_profile(table: ProfileTable, taus: Sequence[float]) -> dict[str, np.ndarray]:
    """``rho_s(tau)``: share of instances solved within ``tau`` times the fastest solver."""
    taus = np.asarray(taus, dtype=float)
    if taus.size and (taus[0] < 1.0 or np.any(np.diff(taus) <= 0)):
        raise PreconditionError("tau grid must start at >= 1 and increase strictly")
    ratios = table.ratios()
    n = max(len(table.instances), 1)
    out = {}
    for s in table.solvers:
        r = np.array([ratios.get((s, p), math.inf) for p in table.instances])
        out[s] = (r[None, :] <= taus[:, None]).sum(axis=1) / n
    return out


def default_taus(top: float = 1e3, points: int = 61) -> np.ndarray:
    return np.logspace(0.0, math.log10(top), points)


def write_profile_csv(path, taus: Sequence[float], profile: Mapping[str, np.ndarray]) -> None:
    solvers = list(profile)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", *solvers])
        for k, tau in enumerate(taus):
            w.writerow([repr(float(tau)), *(repr(float(profile[s][k])) for s in solvers)])
