"""Problem model, constraint partition and the mixed penalty/log-barrier merit.

Sign conventions: inequalities are ``g(x) <= 0``, equalities ``h(x) = 0``,
linear constraints ``A x <= b`` plus per-variable bounds. Constraint indices
are 0-based throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .profiles import violation

Evaluator = Callable[[np.ndarray], float]

MEMBERSHIP_SLACK = 1e-12


class ProblemError(ValueError):
    """Raised when a problem cannot be constructed or initialised."""


@dataclass(frozen=True, eq=False)
class Problem:
    n: int
    objective: Evaluator
    x0: np.ndarray
    ineq: tuple[Evaluator, ...] = ()
    eq: tuple[Evaluator, ...] = ()
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    name: str = "problem"
    known_f_star: float | None = None
    known_x_star: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise ProblemError("n must be >= 1")
        n = int(self.n)
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if x0.shape != (n,):
            raise ProblemError(f"x0 has length {x0.size}, expected {n}")
        lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, float).ravel()
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float).ravel()
        if lower.shape != (n,) or upper.shape != (n,):
            raise ProblemError("bounds must have length n")
        if np.any(lower > upper):
            raise ProblemError("lower bound exceeds upper bound")
        if self.A is None:
            A, b = np.zeros((0, n)), np.zeros(0)
        else:
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            b = np.asarray(self.b, dtype=float).ravel()
            if A.shape[1] != n or A.shape[0] != b.size:
                raise ProblemError(f"A must be q x {n} with len(b) == q")
        xs = None if self.known_x_star is None else np.asarray(self.known_x_star, float).ravel()
        for name, val in dict(n=n, x0=x0, lower=lower, upper=upper, A=A, b=b,
                              ineq=tuple(self.ineq), eq=tuple(self.eq),
                              known_x_star=xs).items():
            object.__setattr__(self, name, val)
        if not self.in_X(x0):
            raise ProblemError("x0 violates the linear constraints or bounds")

    @property
    def m(self) -> int:
        return len(self.ineq)

    @property
    def p(self) -> int:
        return len(self.eq)

    @property
    def q(self) -> int:
        return self.A.shape[0]

    def in_X(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - MEMBERSHIP_SLACK) or np.any(x > self.upper + MEMBERSHIP_SLACK):
            return False
        return bool(np.all(self.A @ x <= self.b + MEMBERSHIP_SLACK)) if self.q else True

    def evaluate(self, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Raw (f, g, h) at x. Evaluator exceptions become NaN."""
        x = np.asarray(x, dtype=float)
        return (_safe(self.objective, x),
                np.array([_safe(gi, x) for gi in self.ineq], dtype=float),
                np.array([_safe(hj, x) for hj in self.eq], dtype=float))

    def linear_as_ineq(self) -> "Problem":
        """Copy with the rows of ``A x <= b`` moved into the nonlinear inequalities.

        Bounds stay in X. This is how linear rows are handled in penalty mode.
        """
        rows = [_LinearRow(a.copy(), float(bi)) for a, bi in zip(self.A, self.b)]
        return Problem(self.n, self.objective, self.x0, self.ineq + tuple(rows), self.eq,
                       None, None, self.lower, self.upper, self.name,
                       self.known_f_star, self.known_x_star)


@dataclass(frozen=True)
class _LinearRow:
    a: np.ndarray
    b: float

    def __call__(self, x):
        return float(self.a @ x - self.b)


def _safe(fn: Evaluator, x: np.ndarray) -> float:
    try:
        return float(fn(x))
    except (ArithmeticError, ValueError):
        return math.nan


@dataclass(frozen=True)
class ConstraintPartition:
    log_set: tuple[int, ...]
    ext_set: tuple[int, ...]


@dataclass(frozen=True)
class MeritParams:
    rho_log: float
    rho_ext: float
    nu: float = 2.0

    def __post_init__(self):
        if not self.rho_log > 0 or not self.rho_ext > 0:
            raise ValueError("penalty parameters must be positive")
        if not 1.0 < self.nu <= 2.0:
            raise ValueError("nu must lie in (1, 2]")


@dataclass
class EvaluationRecord:
    x: np.ndarray
    f: float
    g: np.ndarray
    h: np.ndarray
    merit: float
    violation: float
    eval_index: int
    status: str = "ok"  # "ok" | "barrier" | "evaluator-failure"
    raw_finite: bool = field(init=False)

    def __post_init__(self):
        self.raw_finite = bool(np.isfinite(self.f) and np.all(np.isfinite(self.g))
                               and np.all(np.isfinite(self.h)))


def partition_constraints(problem: Problem) -> ConstraintPartition:
    """Split inequalities by their sign at x0: g < 0 -> barrier, g >= 0 -> penalty."""
    return partition_from_g(problem.evaluate(problem.x0)[1])


def partition_from_g(g0) -> ConstraintPartition:
    g0 = np.asarray(g0, dtype=float)
    bad = np.flatnonzero(~np.isfinite(g0))
    if bad.size:
        raise ProblemError(f"inequality constraint {int(bad[0])} is not finite at x0")
    return ConstraintPartition(tuple(int(i) for i in np.flatnonzero(g0 < 0)),
                               tuple(int(i) for i in np.flatnonzero(g0 >= 0)))


def merit_from_values(f: float, g: np.ndarray, h: np.ndarray,
                      part: ConstraintPartition, params: MeritParams) -> tuple[float, str]:
    """Merit value and status from cached raw values (no evaluation)."""
    if math.isnan(f) or np.isnan(g).any() or np.isnan(h).any():
        return math.inf, "evaluator-failure"
    g_log = g[list(part.log_set)]
    if np.any(g_log >= 0):
        return math.inf, "barrier"
    if f == math.inf:
        return math.inf, "ok"
    g_ext = g[list(part.ext_set)]
    nu = params.nu
    ext = np.sum(np.maximum(g_ext, 0.0) ** nu) + np.sum(np.abs(h) ** nu)
    z = f - params.rho_log * np.sum(np.log(-g_log)) + ext / params.rho_ext
    z = float(z)
    return (z, "ok") if not math.isnan(z) else (math.inf, "evaluator-failure")


def merit_eval(problem: Problem, part: ConstraintPartition, params: MeritParams,
               x: np.ndarray, eval_index: int = 0) -> EvaluationRecord:
    x = np.array(x, dtype=float)
    f, g, h = problem.evaluate(x)
    z, status = merit_from_values(f, g, h, part, params)
    return EvaluationRecord(x, f, g, h, z, violation(g, h), eval_index, status)


def multiplier_estimates(problem: Problem, part: ConstraintPartition, params: MeritParams,
                         x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange multiplier estimates implied by the merit at x (diagnostics only)."""
    _, g, h = problem.evaluate(x)
    return multipliers_from_values(g, h, part, params)


def multipliers_from_values(g, h, part: ConstraintPartition,
                            params: MeritParams) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    log_idx, ext_idx = list(part.log_set), list(part.ext_set)
    if np.any(~(g[log_idx] < 0)):
        raise ValueError("multiplier estimates need g < 0 on every barrier constraint")
    nu = params.nu
    lam = np.zeros(g.size)
    lam[log_idx] = params.rho_log / (-g[log_idx])
    lam[ext_idx] = nu * np.maximum(g[ext_idx], 0.0) ** (nu - 1) / params.rho_ext
    mu = nu * np.abs(h) ** (nu - 1) / params.rho_ext
    return lam, mu
