"""Feasibility-aware convergence tests and performance/data profiles.

A solver "converges" on a problem at the first evaluation whose objective,
with infeasible points mapped to +inf, satisfies

    f_M - f(x) >= (1 - tau) * (f_M - f_L)

where f_L and f_M are the best and worst feasible objective values seen by
*any* solver over *all* evaluated points of that problem.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-4
DEFAULT_TAUS = (1e-1, 1e-3, 1e-5)


def violation(g: Sequence[float], h: Sequence[float]) -> float:
    """Constraint violation c(x) = sum max(0, g_i) + sum |h_j|.

    +inf entries propagate; NaN entries are treated as +inf.
    """
    g = np.asarray(g, dtype=float).ravel()
    h = np.asarray(h, dtype=float).ravel()
    if np.isnan(g).any() or np.isnan(h).any():
        return math.inf
    return float(np.sum(np.maximum(g, 0.0)) + np.sum(np.abs(h)))


@dataclass
class RunHistory:
    problem: str
    solver: str
    eval_index: np.ndarray
    f: np.ndarray
    violation: np.ndarray

    def __post_init__(self):
        self.eval_index = np.asarray(self.eval_index, dtype=int)
        self.f = np.asarray(self.f, dtype=float)
        self.violation = np.asarray(self.violation, dtype=float)
        if not (len(self.eval_index) == len(self.f) == len(self.violation)):
            raise ValueError("eval_index, f and violation must have equal length")
        if len(self.eval_index):
            if self.eval_index[0] != 1 or np.any(np.diff(self.eval_index) <= 0):
                raise ValueError(
                    f"{self.problem}/{self.solver}: eval_index must be strictly "
                    "increasing from 1"
                )

    def feasible_f(self, feas_tol: float = FEASIBILITY_TOL) -> np.ndarray:
        """Objective values with infeasible (or non-finite) entries set to +inf."""
        ok = (self.violation <= feas_tol) & np.isfinite(self.f)
        return np.where(ok, self.f, np.inf)


@dataclass
class ProfileTable:
    problems: list[str]
    solvers: list[str]
    t: np.ndarray  # |P| x |S|, float with np.inf for "not solved"
    n_p: np.ndarray
    tau: float
    f_L: np.ndarray = field(default_factory=lambda: np.empty(0))
    f_M: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous nondecreasing step function.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``; the
    function is 0 left of the first breakpoint.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, a: float) -> float:
        i = np.searchsorted(self.breakpoints, a, side="right")
        return 0.0 if i == 0 else float(self.values[i - 1])


def convergence_eval_count(
    history: RunHistory,
    f_M: float,
    f_L: float,
    tau: float,
    feas_tol: float = FEASIBILITY_TOL,
) -> float:
    """Smallest eval_index passing the convergence test, or ``inf``."""
    if not (math.isfinite(f_M) and math.isfinite(f_L)) or f_M < f_L:
        raise ValueError("need finite f_M >= f_L")
    f = history.feasible_f(feas_tol)
    with np.errstate(invalid="ignore"):
        passed = (f_M - f) >= (1.0 - tau) * (f_M - f_L)
    idx = np.flatnonzero(passed)
    return float(history.eval_index[idx[0]]) if len(idx) else math.inf


def build_table(
    histories: Iterable[RunHistory],
    tau: float,
    dims: dict[str, int],
    feas_tol: float = FEASIBILITY_TOL,
) -> ProfileTable:
    """Assemble t_{p,s}; problems nobody solved feasibly are dropped."""
    by_key: dict[tuple[str, str], RunHistory] = {}
    for h in histories:
        key = (h.problem, h.solver)
        if key in by_key:
            raise ValueError(f"duplicate history for problem={key[0]!r} solver={key[1]!r}")
        by_key[key] = h
    problems = sorted({p for p, _ in by_key})
    solvers = sorted({s for _, s in by_key})

    rows, kept, n_p, f_Ls, f_Ms = [], [], [], [], []
    for p in problems:
        feas = [by_key[p, s].feasible_f(feas_tol) for s in solvers if (p, s) in by_key]
        feas = np.concatenate(feas) if feas else np.empty(0)
        feas = feas[np.isfinite(feas)]
        if feas.size == 0:
            logger.warning("dropping problem %s: no solver produced a feasible point", p)
            continue
        f_L, f_M = float(feas.min()), float(feas.max())
        row = [
            convergence_eval_count(by_key[p, s], f_M, f_L, tau, feas_tol)
            if (p, s) in by_key else math.inf
            for s in solvers
        ]
        rows.append(row)
        kept.append(p)
        n_p.append(dims[p])
        f_Ls.append(f_L)
        f_Ms.append(f_M)
    t = np.array(rows, dtype=float).reshape(len(kept), len(solvers))
    return ProfileTable(kept, solvers, t, np.array(n_p, dtype=int), tau,
                        np.array(f_Ls), np.array(f_Ms))


def _fraction_step(measure: np.ndarray, n_problems: int) -> StepFunction:
    finite = np.sort(measure[np.isfinite(measure)])
    bps, counts = np.unique(finite, return_counts=True)
    return StepFunction(bps, np.cumsum(counts) / n_problems)


def performance_profile(table: ProfileTable) -> dict[str, StepFunction]:
    """rho_s(a) = |{p : t_ps / min_s' t_ps' <= a}| / |P|."""
    if table.t.size == 0:
        raise ValueError("empty profile table")
    best = table.t.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(table.t), table.t / best, np.inf)
    n = table.t.shape[0]
    return {s: _fraction_step(ratio[:, j], n) for j, s in enumerate(table.solvers)}


def data_profile(table: ProfileTable) -> dict[str, StepFunction]:
    """d_s(k) = |{p : t_ps <= k (n_p + 1)}| / |P|."""
    if table.t.size == 0:
        raise ValueError("empty profile table")
    budget_units = table.t / (table.n_p[:, None] + 1.0)
    n = table.t.shape[0]
    return {s: _fraction_step(budget_units[:, j], n) for j, s in enumerate(table.solvers)}


# -- I/O ---------------------------------------------------------------------

def read_histories(paths: Iterable[Path]) -> list[RunHistory]:
    """Read JSONL histories (problem, solver, eval_index, f, violation per line)."""
    rows: dict[tuple[str, str], list[tuple[int, float, float]]] = {}
    origin: dict[tuple[str, str], Path] = {}
    for path in paths:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = (str(rec["problem"]), str(rec["solver"]))
                    f = math.inf if rec["f"] is None else float(rec["f"])
                    v = math.inf if rec["violation"] is None else float(rec["violation"])
                    idx = int(rec["eval_index"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: malformed history line ({exc})") from exc
                if origin.setdefault(key, path) != path:
                    raise ValueError(f"{path}:{lineno}: problem={key[0]!r} solver={key[1]!r} "
                                     f"already read from {origin[key]}")
                rows.setdefault(key, []).append((idx, f, v))
    out = []
    for (p, s), recs in sorted(rows.items()):
        recs.sort()
        idx, f, v = zip(*recs)
        out.append(RunHistory(p, s, idx, f, v))
    return out


def write_profiles_csv(path: Path, tables: Sequence[ProfileTable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "breakpoint", "value", "kind", "tau"])
        for table in tables:
            for kind, prof in (("perf", performance_profile(table)),
                               ("data", data_profile(table))):
                for s in table.solvers:
                    sf = prof[s]
                    for bp, val in zip(sf.breakpoints, sf.values):
                        w.writerow([s, repr(float(bp)), repr(float(val)), kind, repr(table.tau)])
