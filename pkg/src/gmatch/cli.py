"""Command line entry point: solve, transform, convert, generate, bench, profile.

Exit codes: 0 success, 1 usage error, 2 unreadable input or infeasible data.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import ddio
from .bench import (default_taus, fixed_target_times, generate_suite, load_runs, load_suite,
                    performance_profile, run_benchmark, write_profile_csv)
from .bench.runner import default_workers
from .errors import GraphMatchingError, InfeasibleError, InvalidProblemError, ParseError
from .solvers import SOLVERS, SolverParams, solve
from .transforms import gm_to_qap, make_non_positive, negate_for_max, qap_to_gm, remove_unary


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_problem(path: str):
    if path == "-":
        return ddio.parse(sys.stdin.buffer.read())
    return ddio.load(path)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args) -> SolverParams:
    types = {f.name: f.type for f in fields(SolverParams)}
    values = {}
    for item in args.param or []:
        key, sep, raw = item.partition("=")
        if not sep or key not in types:
            raise UsageError(f"bad --param {item!r}; known keys: {', '.join(sorted(types))}")
        kind = types[key]
        try:
            if kind == "bool":
                if raw.lower() not in ("0", "1", "true", "false"):
                    raise ValueError(raw)
                values[key] = raw.lower() in ("1", "true")
            else:
                values[key] = int(raw) if kind == "int" else float(raw)
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    for key in ("budget", "seed"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if getattr(args, "bijective", False):
        values["bijective"] = True
    return SolverParams(**values)


def _csv_floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def cmd_solve(args) -> int:
    problem = _read_problem(args.input)
    name = "stdin" if args.input == "-" else Path(args.input).stem
    record = solve(problem, args.solver, _params(args), instance=name)
    _emit(json.dumps(record.to_dict(), indent=1) + "\n", args.out)
    return 0


_TRANSFORMS = {
    "bijective": lambda p, mode: gm_to_qap(p),
    "nonpositive": lambda p, mode: make_non_positive(p),
    "zero-unary": lambda p, mode: remove_unary(p),
    "qap": lambda p, mode: qap_to_gm(p, mode=mode),
}


def cmd_transform(args) -> int:
    problem = _read_problem(args.input)
    if args.to == "maximization":
        result = negate_for_max(problem)
        report = {"transform": "negate_for_max", "shift": 0.0, "scale": -1.0}
    else:
        result, rep = _TRANSFORMS[args.to](problem, args.mode)
        report = rep.to_dict()
    if args.out:
        ddio.save(result, args.out)
    else:
        report["dd"] = ddio.write(result)
    sys.stdout.write(json.dumps(report, indent=1) + "\n")
    return 0


def cmd_convert(args) -> int:
    problem = _read_problem(args.input)
    if args.validate:
        sys.stdout.write(f"ok: {problem.num_nodes} nodes, {problem.num_labels} labels, "
                         f"{problem.num_assignments} assignments, {problem.num_edges} edges\n")
        return 0
    _emit(ddio.write(problem), args.out)
    return 0


def cmd_generate(args) -> int:
    suite = generate_suite(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, problem in suite.problems.items():
        ddio.save(problem, out / f"{name}.dd")
    if suite.optima:
        (out / "optima.json").write_text(json.dumps(suite.optima, indent=1) + "\n")
    if suite.truth:
        truth = {k: {str(i): s for i, s in v.items()} for k, v in suite.truth.items()}
        (out / "truth.json").write_text(json.dumps(truth, indent=1) + "\n")
    sys.stdout.write(f"wrote {len(suite.problems)} instances to {out}\n")
    return 0


def cmd_bench(args) -> int:
    if bool(args.suite) == bool(args.generate):
        raise UsageError("bench needs exactly one of --suite and --generate")
    suite = load_suite(args.suite) if args.suite else generate_suite(args.generate)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        raise UsageError(f"unknown solvers {unknown}; choose from {', '.join(SOLVERS)}")
    result = run_benchmark(suite, solvers, _csv_floats(args.budgets), args.trials,
                           _params(args), args.workers, args.out)
    crashed = sum(1 for r in result.records if r.error)
    sys.stdout.write(f"{len(result.records)} runs ({crashed} crashed) written to {args.out}\n")
    return 0


def cmd_profile(args) -> int:
    records = load_runs(args.runs)
    optima = None
    if args.optima:
        optima = {k: float(v) for k, v in json.loads(Path(args.optima).read_text()).items()}
    names = list(dict.fromkeys(r.instance for r in records))
    table = fixed_target_times(names, records, args.tol, optima)
    taus = default_taus(args.tau_max, args.points)
    profile = performance_profile(table, taus)
    write_profile_csv(args.out, taus, profile)
    sys.stdout.write(f"profile of {len(table.solvers)} solvers on {len(names)} instances "
                     f"written to {args.out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gmatch", description="Graph matching solvers, transforms and benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_opts(q, with_budget=True):
        if with_budget:
            q.add_argument("--budget", type=float, default=10.0, help="seconds per run")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--bijective", action="store_true",
                       help="only complete matchings matter (square inputs)")
        q.add_argument("--param", action="append", metavar="KEY=VALUE",
                       help="override a solver parameter (repeatable)")

    q = sub.add_parser("solve", help="run one solver on a dd file")
    q.add_argument("input", help="dd file, or - for standard input")
    q.add_argument("--solver", required=True, choices=SOLVERS)
    solver_opts(q)
    q.add_argument("--out", help="write the RunRecord JSON here")
    q.set_defaults(func=cmd_solve)

    q = sub.add_parser("transform", help="apply a cost transform; prints the report as JSON")
    q.add_argument("input")
    q.add_argument("--to", required=True,
                   choices=["bijective", "nonpositive", "zero-unary", "qap", "maximization"])
    q.add_argument("--mode", choices=["unary", "full"], default="unary",
                   help="shift used by --to qap")
    q.add_argument("--out", help="write the transformed dd file here (otherwise embedded in the report)")
    q.set_defaults(func=cmd_transform)

    q = sub.add_parser("convert", help="read and re-emit (or just validate) a dd file")
    q.add_argument("input")
    q.add_argument("--validate", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_convert)

    q = sub.add_parser("generate", help="write a generated suite as dd files")
    q.add_argument("spec", help="random|house|caltech[:key=value,...]")
    q.add_argument("--out", required=True, help="output directory")
    q.set_defaults(func=cmd_generate)

    q = sub.add_parser("bench", help="fixed-time and fixed-target benchmark")
    q.add_argument("--suite", help="directory of dd files")
    q.add_argument("--generate", help="generated suite spec, as for 'generate'")
    q.add_argument("--solvers", default=",".join(s for s in SOLVERS if s != "lap"))
    q.add_argument("--budgets", default="1,10,100")
    q.add_argument("--trials", type=int, default=5)
    q.add_argument("--workers", type=int, default=default_workers())
    q.add_argument("--out", required=True)
    solver_opts(q, with_budget=False)
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("profile", help="performance profile CSV from a directory of run records")
    q.add_argument("runs")
    q.add_argument("--out", default="profile.csv")
    q.add_argument("--optima", help="JSON of known optima by instance")
    q.add_argument("--tol", type=float, default=1e-3)
    q.add_argument("--tau-max", type=float, default=1e3)
    q.add_argument("--points", type=int, default=61)
    q.set_defaults(func=cmd_profile)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, InfeasibleError, InvalidProblemError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (GraphMatchingError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
