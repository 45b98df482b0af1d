"""LOG-DS: generating set search on the mixed penalty/log-barrier merit.

Each iteration runs an optional surrogate search step, an opportunistic poll
ordered by a simplex gradient, and the penalty-parameter update.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np

from .merit import (ConstraintPartition, EvaluationRecord, MeritParams, Problem,
                    ProblemError, merit_from_values, partition_from_g)
from .polyhedral import (DirectionSet, ScaledPolyhedron, default_directions, in_X,
                         scale_rows, tangent_cone_generators)
from .profiles import FEASIBILITY_TOL, violation
from .surrogates import (QuadraticModel, build_model, merit_model_min, order_directions,
                         select_samples, simplex_gradient)

LinearMode = Literal["penalty", "conforming"]
IterKind = Literal["search-success", "poll-success", "unsuccessful"]


@dataclass(frozen=True)
class SolverConfig:
    alpha0: float = 1.0
    phi: float = 1.0
    theta_alpha: float = 0.5
    gamma: float = 1e-9
    beta: float = 1.0 + 1e-9
    zeta: float = 1e-2
    nu: float = 2.0
    rho_log0: float = 1e-1
    epsilon_active: float = 1e-5
    max_evals: int = 2000
    alpha_tol: float = 1e-8
    linear_mode: LinearMode = "penalty"
    search_enabled: bool = True
    feas_tol: float = FEASIBILITY_TOL

    def __post_init__(self):
        checks = {
            "alpha0 > 0": self.alpha0 > 0,
            "phi >= 1": self.phi >= 1,
            "0 < theta_alpha < 1": 0 < self.theta_alpha < 1,
            "gamma > 0": self.gamma > 0,
            "beta > 1": self.beta > 1,
            "0 < zeta < 1": 0 < self.zeta < 1,
            "1 < nu <= 2": 1 < self.nu <= 2,
            "rho_log0 > 0": self.rho_log0 > 0,
            "epsilon_active > 0": self.epsilon_active > 0,
            "max_evals >= 1": int(self.max_evals) >= 1,
            "alpha_tol > 0": self.alpha_tol > 0,
            "linear_mode in {penalty, conforming}": self.linear_mode in ("penalty", "conforming"),
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError("invalid solver config: " + ", ".join(bad))


class BudgetExhausted(Exception):
    pass


@dataclass
class IterationTrace:
    k: int
    kind: str
    x: list[float]
    merit: float
    alpha_before: float
    alpha_after: float
    rho_log_before: float
    rho_log_after: float
    rho_ext_before: float
    rho_ext_after: float
    g_min: float
    evals_used: int
    # Z(x_k; rho_k) at the start of the iteration; kept for auditing, not serialised
    merit_start: float = field(default=math.nan, repr=False)

    def to_json(self) -> str:
        d = asdict(self)
        del d["merit_start"]
        for key, val in d.items():
            if isinstance(val, float) and not math.isfinite(val):
                d[key] = None
        return json.dumps(d)


@dataclass
class SolverState:
    problem: Problem  # working problem (linear rows folded into g in penalty mode)
    partition: ConstraintPartition
    config: SolverConfig
    poly: ScaledPolyhedron
    current: EvaluationRecord
    alpha: float
    rho_log: float
    rho_ext: float
    eval_count: int = 0
    history: list[EvaluationRecord] = field(default_factory=list)
    k: int = 0
    last_iteration_kind: IterKind | None = None
    merit: float = math.inf  # merit of the incumbent at the current parameters
    points: np.ndarray = field(default=None, repr=False)  # stacked history coordinates

    @property
    def x(self) -> np.ndarray:
        return self.current.x

    @property
    def params(self) -> MeritParams:
        return MeritParams(self.rho_log, self.rho_ext, self.config.nu)

    def evaluate(self, x: np.ndarray) -> EvaluationRecord:
        """One black-box call; raises BudgetExhausted when the budget is spent."""
        if self.eval_count >= self.config.max_evals:
            raise BudgetExhausted
        x = np.array(x, dtype=float)
        f, g, h = self.problem.evaluate(x)
        self.eval_count += 1
        z, status = merit_from_values(f, g, h, self.partition, self.params)
        rec = EvaluationRecord(x, f, g, h, z, violation(g, h), self.eval_count, status)
        self._remember(rec)
        return rec

    def _remember(self, rec: EvaluationRecord) -> None:
        if self.points is None:
            self.points = np.empty((self.config.max_evals, self.problem.n))
        self.points[len(self.history)] = rec.x
        self.history.append(rec)

    def seen(self, x: np.ndarray) -> bool:
        pts = self.points[: len(self.history)]
        return bool(np.any(np.max(np.abs(pts - x), axis=1) <= 1e-12 * max(1.0, np.max(np.abs(x)))))

    def samples(self, radius: float, cap: int | None = None, key=lambda r: r.f):
        return select_samples(self.history, self.x, radius, cap=cap, key=key,
                              anchor=self.current, points=self.points)

    def merit_of(self, rec: EvaluationRecord) -> float:
        return merit_from_values(rec.f, rec.g, rec.h, self.partition, self.params)[0]

    def g_min(self) -> float:
        if not self.partition.log_set:
            return math.inf
        return float(np.min(np.abs(self.current.g[list(self.partition.log_set)])))


@dataclass
class RunResult:
    status: str  # "alpha-tol" | "budget"
    best: EvaluationRecord  # final incumbent, best merit at the final parameters
    best_feasible: EvaluationRecord | None
    trace: list[IterationTrace]
    history: list[EvaluationRecord]
    partition: ConstraintPartition
    problem: Problem
    config: SolverConfig
    final_alpha: float
    final_rho_log: float
    final_rho_ext: float
    initial_merit: float

    @property
    def evals(self) -> int:
        return len(self.history)

    def summary(self) -> dict:
        bf = self.best_feasible
        return {
            "problem": self.problem.name,
            "status": self.status,
            "evals": self.evals,
            "iterations": len(self.trace),
            "x": self.best.x.tolist(),
            "f": _finite_or_none(self.best.f),
            "violation": _finite_or_none(self.best.violation),
            "best_feasible": None if bf is None else {
                "x": bf.x.tolist(), "f": bf.f, "violation": bf.violation,
                "eval_index": bf.eval_index},
            "final_alpha": self.final_alpha,
            "final_rho_log": self.final_rho_log,
            "final_rho_ext": self.final_rho_ext,
            "log_set": list(self.partition.log_set),
            "ext_set": list(self.partition.ext_set),
            "linear_mode": self.config.linear_mode,
        }


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def forcing(alpha: float, gamma: float) -> float:
    """Forcing function gamma * alpha**2."""
    return gamma * alpha * alpha


def penalty_update(alpha_next: float, alpha_prev: float, rho_log: float, rho_ext: float,
                   g_min: float, beta: float, zeta: float) -> tuple[float, float, bool, bool]:
    """Penalty-parameter tests on pre-update values.

    Both parameters only move at unsuccessful iterations (alpha_next < alpha_prev).
    Returns (rho_log', rho_ext', log_test, ext_test).
    """
    shrunk = alpha_next < alpha_prev
    g2 = g_min * g_min
    log_test = shrunk and alpha_next <= min(rho_log**beta, g2)
    ext_test = shrunk and alpha_next <= min(rho_log**beta, rho_ext**beta, g2)
    return (zeta * rho_log if log_test else rho_log,
            zeta * rho_ext if ext_test else rho_ext,
            log_test, ext_test)


def working_problem(problem: Problem, mode: LinearMode) -> Problem:
    return problem.linear_as_ineq() if mode == "penalty" else problem


def init(problem: Problem, config: SolverConfig = SolverConfig()) -> SolverState:
    """Partition constraints at x0, set the penalties and evaluate x0.

    rho_ext starts at 1 / max(|f(x0)|, 10).
    """
    work = working_problem(problem, config.linear_mode)
    poly = scale_rows(work.A, work.b, work.lower, work.upper)
    f0, g0, h0 = work.evaluate(work.x0)
    part = partition_from_g(g0)
    if not math.isfinite(f0):
        raise ProblemError("objective is not finite at x0")
    rho_ext = 1.0 / max(abs(f0), 10.0)
    z0, status = merit_from_values(f0, g0, h0, part, MeritParams(config.rho_log0, rho_ext, config.nu))
    rec = EvaluationRecord(work.x0.copy(), f0, g0, h0, z0, violation(g0, h0), 1, status)
    state = SolverState(work, part, config, poly, rec, config.alpha0, config.rho_log0, rho_ext,
                        eval_count=1, merit=z0)
    state._remember(rec)
    return state


def poll_directions(state: SolverState) -> DirectionSet:
    default = default_directions(state.problem.n)
    if state.config.linear_mode == "conforming":
        return tangent_cone_generators(state.poly, state.x, state.config.epsilon_active, default)
    return default


def _accept(state: SolverState, rec: EvaluationRecord) -> bool:
    # the strict test guards against gamma*alpha^2 vanishing below one ulp of the merit
    return (rec.merit <= state.merit - forcing(state.alpha, state.config.gamma)
            and rec.merit < state.merit)


def poll_step(state: SolverState, directions: DirectionSet, complete: bool = False):
    """Poll along ``directions``; returns the accepted direction or None on failure.

    Opportunistic by default (first passing point wins). With ``complete`` every
    direction is tried and the lowest passing merit wins, ties to the earliest.
    """
    best, best_d = None, None
    for d in directions:
        trial = state.x + state.alpha * d
        if not in_X(state.poly, trial):
            continue
        rec = state.evaluate(trial)
        if _accept(state, rec) and (best is None or rec.merit < best.merit):
            best, best_d = rec, d
            if not complete:
                break
    if best is None:
        state.alpha *= state.config.theta_alpha
        return None
    state.current, state.merit = best, best.merit
    state.alpha *= state.config.phi
    return best_d


SearchOracle = Callable[[SolverState], "np.ndarray | None"]


def quadratic_search_oracle(state: SolverState) -> np.ndarray | None:
    """Candidate from minimising the model merit in a ball of radius 2 alpha."""
    radius = 2.0 * state.alpha
    samples = state.samples(radius)
    n = state.problem.n
    if len(samples) < n + 1:
        return None
    f_model = build_model(samples)
    if f_model is None:
        return None
    cur = state.current

    def fit(values, fallback):
        m = build_model(samples.with_values(values))
        return m if m is not None else QuadraticModel.constant(state.x, fallback)

    recs = samples.records
    g_models = [fit([r.g[i] for r in recs], cur.g[i]) for i in range(state.problem.m)]
    h_models = [fit([r.h[j] for r in recs], cur.h[j]) for j in range(state.problem.p)]
    z = merit_model_min(f_model, g_models, h_models, state.partition, state.params,
                        state.x, radius)
    return np.clip(z, state.problem.lower, state.problem.upper)


def search_step(state: SolverState, oracle: SearchOracle = quadratic_search_oracle) -> bool:
    """Try one surrogate candidate; True when it gave sufficient decrease."""
    try:
        z = oracle(state)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        return False
    if z is None or not np.all(np.isfinite(z)):
        return False
    if np.max(np.abs(z - state.x)) <= 1e-12 * max(1.0, np.max(np.abs(state.x))):
        return False
    if not in_X(state.poly, z) or state.seen(z):
        return False
    rec = state.evaluate(z)
    if _accept(state, rec):
        state.current, state.merit = rec, rec.merit
        state.alpha *= state.config.phi
        return True
    return False


def step3_update(state: SolverState, alpha_next: float, alpha_prev: float) -> tuple[float, float]:
    cfg = state.config
    rl, re, _, _ = penalty_update(alpha_next, alpha_prev, state.rho_log, state.rho_ext,
                                  state.g_min(), cfg.beta, cfg.zeta)
    return rl, re


def _poll_ascent(state: SolverState) -> np.ndarray | None:
    samples = state.samples(2.0 * state.alpha, cap=state.problem.n + 1, key=state.merit_of)
    finite = np.isfinite(samples.values)
    if finite.sum() < 2:
        return None
    samples = type(samples)(samples.points[finite], samples.values[finite], samples.center,
                            samples.radius)
    return simplex_gradient(samples)


def run(problem: Problem, config: SolverConfig = SolverConfig(),
        oracle: SearchOracle = quadratic_search_oracle) -> RunResult:
    state = init(problem, config)
    initial_merit = state.merit
    trace: list[IterationTrace] = []
    status = "budget"
    try:
        while True:
            if state.alpha < config.alpha_tol:
                status = "alpha-tol"
                break
            if state.eval_count >= config.max_evals:
                break
            alpha_prev, rl0, re0, z0 = state.alpha, state.rho_log, state.rho_ext, state.merit
            kind: IterKind = "unsuccessful"
            if config.search_enabled and search_step(state, oracle):
                kind = "search-success"
            else:
                # without an ascent indicator the order carries no information
                ascent = _poll_ascent(state)
                dirs = order_directions(poll_directions(state), ascent)
                if poll_step(state, dirs, complete=ascent is None) is not None:
                    kind = "poll-success"
            merit_pre = state.merit
            g_min = state.g_min()
            state.rho_log, state.rho_ext = step3_update(state, state.alpha, alpha_prev)
            if (state.rho_log, state.rho_ext) != (rl0, re0):
                state.merit = state.merit_of(state.current)
            state.last_iteration_kind = kind
            trace.append(IterationTrace(state.k, kind, state.x.tolist(), merit_pre, alpha_prev,
                                        state.alpha, rl0, state.rho_log, re0, state.rho_ext,
                                        g_min, state.eval_count, z0))
            state.k += 1
    except BudgetExhausted:
        status = "budget"
    return _result(state, status, trace, initial_merit)


def _result(state: SolverState, status: str, trace, initial_merit) -> RunResult:
    tol = state.config.feas_tol
    feas = [r for r in state.history if r.violation <= tol and math.isfinite(r.f)]
    best_feasible = min(feas, key=lambda r: (r.f, r.eval_index)) if feas else None
    return RunResult(status, state.current, best_feasible, trace, state.history,
                     state.partition, state.problem, state.config, state.alpha,
                     state.rho_log, state.rho_ext, initial_merit)
