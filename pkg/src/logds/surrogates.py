"""Quadratic surrogates built from past evaluations, plus simplex gradients.

Models are fitted in coordinates scaled by the sample radius and mapped back,
which keeps the basis matrices well conditioned as the stepsize shrinks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .merit import ConstraintPartition, EvaluationRecord, MeritParams
from .polyhedral import DirectionSet

DEDUP_TOL = 1e-12
REG = 1e-10
RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    center: np.ndarray
    c: float
    g: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        object.__setattr__(self, "H", 0.5 * (H + H.T))

    def __call__(self, y) -> float:
        s = np.asarray(y, dtype=float) - self.center
        return float(self.c + self.g @ s + 0.5 * s @ self.H @ s)

    def gradient(self, y) -> np.ndarray:
        return self.g + self.H @ (np.asarray(y, dtype=float) - self.center)

    @classmethod
    def constant(cls, center, value: float) -> "QuadraticModel":
        n = len(center)
        return cls(np.asarray(center, float), float(value), np.zeros(n), np.zeros((n, n)))


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray  # k x n
    values: np.ndarray  # k
    center: np.ndarray
    radius: float
    records: tuple[EvaluationRecord, ...] = ()

    def with_values(self, values) -> "SampleSet":
        return SampleSet(self.points, np.asarray(values, dtype=float), self.center,
                         self.radius, self.records)

    def __len__(self):
        return len(self.values)


def quadratic_cap(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def select_samples(history: Sequence[EvaluationRecord], center, radius: float,
                   cap: int | None = None,
                   key: Callable[[EvaluationRecord], float] = lambda r: r.f,
                   anchor: EvaluationRecord | None = None,
                   points: np.ndarray | None = None) -> SampleSet:
    """Newest finite records within ``radius`` of center, deduplicated, capped.

    The cap defaults to (n+1)(n+2)/2, the size of a full quadratic basis.
    ``anchor`` (normally the incumbent) is always taken first. ``points`` may
    pass the stacked history coordinates to skip rebuilding them.
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    cap = quadratic_cap(n) if cap is None else cap
    chosen: list[EvaluationRecord] = []
    if anchor is not None and anchor.raw_finite:
        chosen.append(anchor)
    if history:
        pts = np.array([r.x for r in history]) if points is None else points[: len(history)]
        near = np.flatnonzero(np.linalg.norm(pts - center, axis=1) <= radius)
        taken = np.array([c.x for c in chosen]).reshape(len(chosen), n)
        exact = {c.x.tobytes() for c in chosen}
        for i in near[::-1]:
            if len(chosen) >= cap:
                break
            rec = history[i]
            key_bytes = rec.x.tobytes()
            if not rec.raw_finite or key_bytes in exact:
                continue
            exact.add(key_bytes)
            if len(taken) and np.min(np.max(np.abs(taken - rec.x), axis=1)) <= DEDUP_TOL:
                continue
            chosen.append(rec)
            taken = np.vstack([taken, rec.x])
    pts = np.array([r.x for r in chosen]).reshape(len(chosen), n)
    vals = np.array([key(r) for r in chosen], dtype=float)
    return SampleSet(pts, vals, center, float(radius), tuple(chosen))


def _quad_basis(S: np.ndarray) -> np.ndarray:
    """Quadratic part scaled so that coefficient norm equals ||H||_F."""
    n = S.shape[1]
    cols = [0.5 * S[:, i] ** 2 for i in range(n)]
    cols += [S[:, i] * S[:, j] / math.sqrt(2.0) for i in range(n) for j in range(i + 1, n)]
    return np.column_stack(cols) if cols else np.zeros((S.shape[0], 0))


def _hessian_from(coef: np.ndarray, n: int) -> np.ndarray:
    H = np.diag(coef[:n]).astype(float)
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = coef[k] / math.sqrt(2.0)
            k += 1
    return H


def build_model(samples: SampleSet) -> QuadraticModel | None:
    """Quadratic model: MFN (underdetermined), interpolation, or regression.

    Returns ``None`` when there are fewer than n+1 points or the basis is
    rank deficient.
    """
    n = samples.center.size
    p, q = len(samples), quadratic_cap(n)
    if p < n + 1:
        return None
    scale = samples.radius if samples.radius > 0 else 1.0
    S = (samples.points - samples.center) / scale
    f = samples.values
    ML = np.column_stack([np.ones(p), S])
    MQ = _quad_basis(S)
    if np.linalg.matrix_rank(ML, tol=RANK_TOL) < n + 1:
        return None
    if p < q:
        # min ||aQ|| s.t. ML aL + MQ aQ = f, via the KKT system with aQ = MQ^T lam
        K = np.block([[MQ @ MQ.T + REG * np.eye(p), ML], [ML.T, np.zeros((n + 1, n + 1))]])
        rhs = np.concatenate([f, np.zeros(n + 1)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return None
        lam, aL = sol[:p], sol[p:]
        aQ = MQ.T @ lam
    else:
        M = np.column_stack([ML, MQ])
        if np.linalg.matrix_rank(M, tol=RANK_TOL) < q:
            return None
        if p == q:
            coef = np.linalg.solve(M, f)
        else:
            coef = np.linalg.lstsq(M, f, rcond=None)[0]
        aL, aQ = coef[: n + 1], coef[n + 1:]
    if not (np.all(np.isfinite(aL)) and np.all(np.isfinite(aQ))):
        return None
    return QuadraticModel(samples.center.copy(), float(aL[0]), aL[1:] / scale,
                          _hessian_from(aQ, n) / scale**2)


class _StackedModels:
    """f, g and h models re-expressed about one center and stacked into arrays."""

    def __init__(self, f_model, g_models, h_models, part: ConstraintPartition,
                 params: MeritParams, center: np.ndarray):
        models = [f_model, *g_models, *h_models]
        self.c = np.array([m(center) for m in models])
        self.G = np.array([m.gradient(center) for m in models])
        self.H = np.array([m.H for m in models])
        self.center = center
        m = len(g_models)
        self.log = 1 + np.array(part.log_set, dtype=int)
        self.ext = 1 + np.array(part.ext_set, dtype=int)
        self.eq = 1 + m + np.arange(len(h_models))
        self.params = params

    def __call__(self, y) -> tuple[float, np.ndarray]:
        s = np.asarray(y, dtype=float) - self.center
        Hs = self.H @ s
        vals = self.c + self.G @ s + 0.5 * (Hs @ s)
        grads = self.G + Hs
        p = self.params
        val, grad = vals[0], grads[0]
        if self.log.size:
            g_log = vals[self.log]
            if (g_log >= 0).any():
                return math.inf, np.zeros_like(s)
            val = val - p.rho_log * np.log(-g_log).sum()
            grad = grad - p.rho_log * (grads[self.log].T @ (1.0 / g_log))
        if self.ext.size or self.eq.size:
            nu = p.nu
            g_ext = np.maximum(vals[self.ext], 0.0)
            h = vals[self.eq]
            ext = (g_ext**nu).sum() + (np.abs(h) ** nu).sum()
            w_ext = nu * g_ext ** (nu - 1)
            w_eq = nu * np.abs(h) ** (nu - 1) * np.sign(h)
            val = val + ext / p.rho_ext
            grad = grad + (grads[self.ext].T @ w_ext + grads[self.eq].T @ w_eq) / p.rho_ext
        return float(val), grad


def model_merit(y, f_model: QuadraticModel, g_models: Sequence[QuadraticModel],
                h_models: Sequence[QuadraticModel], part: ConstraintPartition,
                params: MeritParams) -> tuple[float, np.ndarray]:
    """Merit with every function replaced by its model; returns (value, gradient)."""
    y = np.asarray(y, dtype=float)
    return _StackedModels(f_model, g_models, h_models, part, params, y)(y)


def merit_model_min(f_model: QuadraticModel, g_models: Sequence[QuadraticModel],
                    h_models: Sequence[QuadraticModel], part: ConstraintPartition,
                    params: MeritParams, center, radius: float,
                    max_iter: int = 40) -> np.ndarray:
    """Projected-gradient descent on the model merit inside the ball around center."""
    center = np.asarray(center, dtype=float)
    zhat = _StackedModels(f_model, g_models, h_models, part, params, center)
    y = center.copy()
    val, grad = zhat(y)
    if not math.isfinite(val) or radius <= 0:
        return center

    def project(z):
        s = z - center
        nrm = np.linalg.norm(s)
        return z if nrm <= radius else center + s * (radius / nrm)

    t_last = math.inf
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm == 0 or not np.isfinite(gnorm):
            break
        t = min(2.0 * radius / gnorm, 4.0 * t_last)
        for _ in range(30):
            z = project(y - t * grad)
            zval, zgrad = zhat(z)
            if zval < val:
                break
            t *= 0.5
        else:
            break
        done = val - zval <= 1e-12 * (1.0 + abs(val))
        y, val, grad, t_last = z, zval, zgrad, t
        if done:
            break
    return y


def simplex_gradient(samples: SampleSet) -> np.ndarray | None:
    """Least-squares (minimum-norm) gradient of the sampled values at the center."""
    d = np.max(np.abs(samples.points - samples.center), axis=1) if len(samples) else np.empty(0)
    at_center = np.flatnonzero(d <= DEDUP_TOL)
    if at_center.size == 0 or len(samples) < 2:
        return None
    f0 = samples.values[at_center[0]]
    others = np.flatnonzero(d > DEDUP_TOL)
    if others.size == 0:
        return None
    S = samples.points[others] - samples.center
    delta = samples.values[others] - f0
    if not np.all(np.isfinite(delta)):
        return None
    if np.linalg.matrix_rank(S) == 0:
        return None
    return np.linalg.lstsq(S, delta, rcond=None)[0]


def order_directions(directions: DirectionSet, ascent) -> DirectionSet:
    """Stable sort by d^T ascent: most opposed to the ascent indicator first."""
    if ascent is None:
        return directions
    ascent = np.asarray(ascent, dtype=float)
    if not np.any(ascent) or not np.all(np.isfinite(ascent)):
        return directions
    order = np.argsort(directions.dirs @ ascent, kind="stable")
    return DirectionSet(directions.dirs[order])
