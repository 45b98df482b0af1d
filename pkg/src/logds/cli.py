"""Command-line front end: ``logds solve | bench | profile``.

Exit codes: 0 success, 1 solver-internal failure, 2 usage or load error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

from . import bank
from .merit import ProblemError
from .polyhedral import DegenerateActiveSetError
from .profiles import DEFAULT_TAUS, FEASIBILITY_TOL, build_table, read_histories, write_profiles_csv
from .solver import RunResult, SolverConfig, run

log = logging.getLogger("logds")

_D = SolverConfig()
# flag -> (config field, type, help)
SOLVER_FLAGS = {
    "--max-evals": ("max_evals", int, "evaluation budget"),
    "--alpha0": ("alpha0", float, "initial stepsize"),
    "--alpha-tol": ("alpha_tol", float, "stop when the stepsize falls below this"),
    "--phi": ("phi", float, "stepsize expansion on success"),
    "--theta-alpha": ("theta_alpha", float, "stepsize contraction on failure"),
    "--gamma": ("gamma", float, "sufficient decrease constant"),
    "--beta": ("beta", float, "exponent in the penalty-update tests"),
    "--zeta": ("zeta", float, "penalty-parameter reduction factor"),
    "--nu": ("nu", float, "exterior penalty exponent"),
    "--rho-log0": ("rho_log0", float, "initial barrier parameter"),
    "--epsilon-active": ("epsilon_active", float, "activity tolerance for linear rows"),
}


class UsageError(Exception):
    pass


def _add_solver_flags(p: argparse.ArgumentParser, mode_default: str | None) -> None:
    for flag, (name, typ, text) in SOLVER_FLAGS.items():
        p.add_argument(flag, type=typ, default=getattr(_D, name), dest=name, help=text)
    p.add_argument("--linear-mode", choices=["penalty", "conforming"], default=mode_default,
                   dest="linear_mode",
                   help="handling of linear rows (bench runs both when unset)")
    p.add_argument("--no-search", action="store_false", dest="search_enabled",
                   help="disable the surrogate search step")


def _config(args, **over) -> SolverConfig:
    kw = {f.name: getattr(args, f.name) for f in fields(SolverConfig) if hasattr(args, f.name)}
    kw.update(over)
    try:
        return SolverConfig(**{k: v for k, v in kw.items() if v is not None})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_problem(args):
    if args.problem and args.problem_file:
        raise UsageError("--problem and --problem-file are mutually exclusive")
    if args.problem_file:
        try:
            return bank.load_problem(Path(args.problem_file))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load {args.problem_file}: {exc}") from exc
    if not args.problem:
        raise UsageError("one of --problem or --problem-file is required")
    try:
        return bank.get_builtin(args.problem)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc


def _jnum(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def write_history(path: Path, result: RunResult, solver_id: str) -> None:
    n = result.problem.n
    with open(path, "w") as fh:
        for rec in result.history:
            fh.write(json.dumps({"problem": result.problem.name, "solver": solver_id,
                                 "eval_index": rec.eval_index, "f": _jnum(rec.f),
                                 "violation": _jnum(rec.violation), "n": n}) + "\n")


def write_run(out: Path, result: RunResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.jsonl", "w") as fh:
        for t in result.trace:
            fh.write(t.to_json() + "\n")
    summary = result.summary()
    summary["config"] = asdict(result.config)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_jnum) + "\n")
    write_history(out / "history.jsonl", result, f"logds-{result.config.linear_mode}")


def cmd_solve(args) -> int:
    problem = _resolve_problem(args)
    config = _config(args, linear_mode=args.linear_mode or "penalty")
    try:
        result = run(problem, config)
    except ProblemError as exc:
        raise UsageError(str(exc)) from exc
    except DegenerateActiveSetError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    write_run(Path(args.out), result)
    bf = result.best_feasible
    if bf is None:
        print(f"{problem.name}: status={result.status} evals={result.evals} "
              f"no feasible point (best violation {result.best.violation:.3e})")
    else:
        print(f"{problem.name}: status={result.status} evals={result.evals} "
              f"f={bf.f:.10g} violation={bf.violation:.3e}")
    return 0


def _bench_one(job):
    name, cfg = job
    config = SolverConfig(**cfg)
    try:
        result = run(bank.get_builtin(name), config)
    except (DegenerateActiveSetError, ProblemError) as exc:
        return name, cfg["linear_mode"], None, f"{type(exc).__name__}: {exc}"
    return name, cfg["linear_mode"], result, None


def cmd_bench(args) -> int:
    names = args.problem or bank.builtin_names()
    unknown = [n for n in names if n not in bank.BUILTINS]
    if unknown:
        raise UsageError(f"unknown builtin problem(s): {', '.join(unknown)}")
    modes = [args.linear_mode] if args.linear_mode else ["penalty", "conforming"]
    jobs = [(n, asdict(_config(args, linear_mode=m))) for n in sorted(names) for m in sorted(modes)]
    workers = max(1, int(os.environ.get("LOGDS_WORKERS", "1")))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_bench_one, jobs))
    else:
        outcomes = [_bench_one(j) for j in jobs]

    out = Path(args.out)
    hist_dir = out / "histories"
    hist_dir.mkdir(parents=True, exist_ok=True)
    report = []
    for name, mode, result, err in outcomes:
        solver_id = f"logds-{mode}"
        entry = {"problem": name, "solver": solver_id}
        if err is not None:
            entry.update(status="failed", error=err)
            print(f"{name} [{solver_id}]: FAILED {err}", file=sys.stderr)
        else:
            write_history(hist_dir / f"{name}__{solver_id}.jsonl", result, solver_id)
            bf = result.best_feasible
            entry.update(status=result.status, evals=result.evals,
                         best_feasible_f=None if bf is None else bf.f)
            print(f"{name} [{solver_id}]: {result.status} evals={result.evals} "
                  f"f={'n/a' if bf is None else format(bf.f, '.8g')}")
        report.append(entry)
    (out / "bench.json").write_text(json.dumps(report, indent=2) + "\n")
    return 1 if all(e["status"] == "failed" for e in report) else 0


def cmd_profile(args) -> int:
    src = Path(args.histories)
    paths = sorted(src.glob("*.jsonl")) if src.is_dir() else [src]
    paths = [p for p in paths if p.exists()]
    if not paths:
        raise UsageError(f"no history files under {src}")
    try:
        histories = read_histories(paths)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dims = history_dims(paths)
    taus = args.tau or list(DEFAULT_TAUS)
    tables = []
    for tau in taus:
        table = build_table(histories, tau, dims, feas_tol=args.feas_tol)
        if table.t.size == 0:
            raise UsageError("no problem has a feasible point in any history")
        tables.append(table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_profiles_csv(out / "profiles.csv", tables)
    print(f"wrote {out / 'profiles.csv'} ({len(tables)} tau group(s), "
          f"{len(tables[0].problems)} problems, {len(tables[0].solvers)} solvers)")
    return 0


def history_dims(paths) -> dict[str, int]:
    """Problem dimensions from the ``n`` field, else from the builtin registry."""
    dims: dict[str, int] = {}
    for path in paths:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    if "n" in rec:
                        dims[rec["problem"]] = int(rec["n"])
                    elif rec["problem"] in bank.BUILTINS:
                        dims.setdefault(rec["problem"], bank.BUILTINS[rec["problem"]]["n"])
                    else:
                        dims.setdefault(rec["problem"], None)
    missing = sorted(k for k, v in dims.items() if v is None)
    if missing:
        raise UsageError(f"dimension unknown for problem(s): {', '.join(missing)}")
    return dims


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="logds", formatter_class=fmt,
                                     description="LOG-DS derivative-free constrained solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", formatter_class=fmt, help="solve one problem")
    p.add_argument("--problem", help="builtin problem name")
    p.add_argument("--problem-file", help="JSON problem file")
    _add_solver_flags(p, "penalty")
    p.add_argument("--out", default="logds-out", help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", formatter_class=fmt,
                       help="run the builtin suite in one or both linear modes")
    p.add_argument("--problem", action="append", help="restrict to builtin(s); repeatable")
    _add_solver_flags(p, None)
    p.add_argument("--out", default="logds-bench", help="output directory")
    p.set_defaults(func=cmd_bench, problem_file=None)

    p = sub.add_parser("profile", formatter_class=fmt,
                       help="performance and data profiles from run histories")
    p.add_argument("--histories", required=True, help="directory of *.jsonl or one file")
    p.add_argument("--tau", type=float, action="append",
                   help=f"accuracy level, repeatable (default {', '.join(map(str, DEFAULT_TAUS))})")
    p.add_argument("--feas-tol", type=float, default=FEASIBILITY_TOL, dest="feas_tol",
                   help="violation threshold above which a point counts as infeasible")
    p.add_argument("--out", default="logds-profiles", help="output directory")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
