"""Benchmark suites and the trial runner.

Each (instance, solver, trial) cell runs single-threaded in a worker
process.  Cells run once with the largest budget; fixed-time tables read the
trace at every smaller budget.
"""

from __future__ import annotations

import json
import os
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..ddio import load
from ..errors import PreconditionError
from ..model import RunRecord, brute_force_solve
from ..solvers import SOLVERS, SolverParams, solve
from . import generators
from .metrics import (DEFAULT_BUDGETS, BenchmarkSuite, ProfileTable, default_taus,
                      fixed_target_times, fixed_time_report, performance_profile,
                      write_fixed_time_csv, write_profile_csv)


def load_suite(directory) -> BenchmarkSuite:
    """All ``*.dd`` files of a directory, with optional ``optima.json`` and ``truth.json``.

    ``optima.json`` maps instance names (file stems) to optimal energies,
    ``truth.json`` maps them to ``{node: label}`` objects.
    """
    directory = Path(directory)
    files = sorted(directory.glob("*.dd"))
    if not files:
        raise PreconditionError(f"no .dd files in {directory}")
    problems = {f.stem: load(f) for f in files}
    optima, truth = {}, {}
    if (directory / "optima.json").exists():
        optima = {k: float(v) for k, v in json.loads((directory / "optima.json").read_text()).items()}
    if (directory / "truth.json").exists():
        raw = json.loads((directory / "truth.json").read_text())
        truth = {k: {int(i): int(s) for i, s in v.items()} for k, v in raw.items()}
    return BenchmarkSuite(problems, truth, optima)


_SPEC = re.compile(r"^(random|house|caltech)(?::(.*))?$")


def generate_suite(spec: str) -> BenchmarkSuite:
    """Build a suite from ``kind[:key=value,...]``.

    Kinds and keys (defaults in brackets):
      random: count [100], seed [0], nodes [6], labels [6]; optima from brute force
      house: n [30], count [20], seed [0]; identity ground truth
      caltech: nodes [10], labels [15], outliers [2], count [10], seed [0]; inlier ground truth
    Instance ``k`` of house and caltech suites uses seed ``seed + k``.
    """
    m = _SPEC.match(spec.strip())
    if not m:
        raise PreconditionError(f"bad suite spec {spec!r}; expected random|house|caltech[:k=v,...]")
    kind, rest = m.group(1), m.group(2)
    opts: dict[str, int] = {}
    for item in filter(None, (rest or "").split(",")):
        key, sep, value = item.partition("=")
        if not sep or not value.strip().lstrip("-").isdigit():
            raise PreconditionError(f"bad suite option {item!r}")
        opts[key.strip()] = int(value)
    allowed = {"random": {"count", "seed", "nodes", "labels"},
               "house": {"n", "count", "seed"},
               "caltech": {"nodes", "labels", "outliers", "count", "seed"}}[kind]
    if set(opts) - allowed:
        raise PreconditionError(f"unknown {kind} options: {sorted(set(opts) - allowed)}")
    count, seed = opts.get("count"), opts.get("seed", 0)

    if kind == "random":
        insts = generators.random_suite(count or 100, seed, opts.get("nodes", 6), opts.get("labels", 6))
        problems = dict(insts)
        optima = {name: brute_force_solve(p)[1] for name, p in insts}
        return BenchmarkSuite(problems, optima=optima)
    if kind == "house":
        n = opts.get("n", 30)
        problems, truth = {}, {}
        for k in range(count or 20):
            name = f"house{n}_{seed + k:03d}"
            problems[name] = generators.gen_house_style(n, seed + k)
            truth[name] = {i: i for i in range(n)}
        return BenchmarkSuite(problems, truth)
    nv, nl, out = opts.get("nodes", 10), opts.get("labels", 15), opts.get("outliers", 2)
    problems, truth = {}, {}
    for k in range(count or 10):
        name = f"caltech{nv}x{nl}_{seed + k:03d}"
        problems[name] = generators.gen_caltech_style(nv, nl, out, seed + k)
        truth[name] = generators.caltech_ground_truth(nv, out)
    return BenchmarkSuite(problems, truth)


def _run_cell(args) -> RunRecord:
    name, problem, solver, params = args
    try:
        return solve(problem, solver, params, instance=name)
    except Exception as exc:  # a crash is a missing solution, not a failed benchmark
        msg = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return RunRecord(solver, name, (), float("inf"), None, [], params.to_dict(), 0.0, msg)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 2) // 2)


@dataclass
class BenchmarkResult:
    records: list[RunRecord]
    fixed_time: list[dict]
    profile_table: ProfileTable
    taus: np.ndarray
    profile: dict


def run_benchmark(suite: BenchmarkSuite, solvers: Sequence[str] = SOLVERS,
                  budgets: Sequence[float] = DEFAULT_BUDGETS, trials: int = 5,
                  params: SolverParams | None = None, workers: int | None = None,
                  out=None, tol: float = 1e-3) -> BenchmarkResult:
    """Run every solver ``trials`` times on every instance and summarize.

    With ``out`` set, writes ``fixed_time.csv``, ``profile.csv`` and one
    ``runs/<instance>__<solver>__<trial>.json`` per cell.
    """
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        raise PreconditionError(f"unknown solvers: {unknown}")
    if trials < 1 or not budgets:
        raise PreconditionError("need at least one trial and one budget")
    params = replace(params or SolverParams(), budget=float(max(budgets)))
    cells = [(name, problem, solver, params)
             for name, problem in suite.problems.items() for solver in solvers for _ in range(trials)]
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        records = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (8 * workers))))

    rows = fixed_time_report(suite, records, budgets, tol)
    table = fixed_target_times(suite, records, tol)
    taus = default_taus()
    profile = performance_profile(table, taus)
    if out is not None:
        out = Path(out)
        (out / "runs").mkdir(parents=True, exist_ok=True)
        write_fixed_time_csv(out / "fixed_time.csv", rows)
        write_profile_csv(out / "profile.csv", taus, profile)
        counter: dict[tuple[str, str], int] = {}
        for r in records:
            k = counter[r.instance, r.solver] = counter.get((r.instance, r.solver), -1) + 1
            path = out / "runs" / f"{r.instance}__{r.solver}__{k}.json"
            path.write_text(json.dumps(r.to_dict(), indent=1) + "\n")
    return BenchmarkResult(records, rows, table, taus, profile)


def load_runs(directory) -> list[RunRecord]:
    files = sorted(Path(directory).glob("*.json"))
    if not files:
        raise PreconditionError(f"no run records in {directory}")
    return [RunRecord.from_dict(json.loads(f.read_text())) for f in files]
