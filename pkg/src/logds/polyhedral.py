"""Linear-constraint geometry: row scaling, epsilon-active sets, conforming directions.

Bounds are folded in as unit rows (``x_i <= u_i`` then ``-x_i <= -l_i``)
after the general rows for activity and cone purposes, but membership tests
them directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .merit import MEMBERSHIP_SLACK

RANK_TOL = 1e-10


class DegenerateActiveSetError(ValueError):
    """The epsilon-active rows are linearly dependent.

    Only the nondegenerate tangent-cone construction is implemented; run
    with ``linear_mode="penalty"`` instead.
    """


@dataclass(frozen=True, eq=False)
class ScaledPolyhedron:
    A_bar: np.ndarray
    b_bar: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.size

    def folded(self) -> tuple[np.ndarray, np.ndarray]:
        """All rows, bounds included, as (M, c) with M x <= c and unit rows."""
        eye = np.eye(self.n)
        up = np.flatnonzero(np.isfinite(self.upper))
        lo = np.flatnonzero(np.isfinite(self.lower))
        M = np.vstack([self.A_bar, eye[up], -eye[lo]])
        c = np.concatenate([self.b_bar, self.upper[up], -self.lower[lo]])
        return M, c


@dataclass(frozen=True, eq=False)
class DirectionSet:
    dirs: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.dirs, dtype=float))
        if d.shape[0] == 0:
            raise ValueError("direction set must be nonempty")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise ValueError("directions must have unit norm")
        object.__setattr__(self, "dirs", d)

    def __len__(self):
        return self.dirs.shape[0]

    def __iter__(self):
        return iter(self.dirs)


def default_directions(n: int) -> DirectionSet:
    """[1, -1, I, -I] with the all-ones vector normalised; duplicates (n = 1) removed."""
    ones = np.ones(n) / np.sqrt(n)
    rows = [ones, -ones, *np.eye(n), *(-np.eye(n))]
    out: list[np.ndarray] = []
    for r in rows:
        if not any(np.array_equal(r, o) for o in out):
            out.append(r)
    return DirectionSet(np.array(out))


def scale_rows(A, b, lower=None, upper=None) -> ScaledPolyhedron:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"linear constraint row {int(zero[0])} is identically zero")
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return ScaledPolyhedron(A / norms[:, None], b / norms, lower, upper)


def eps_active(poly: ScaledPolyhedron, x, epsilon: float) -> np.ndarray:
    """Indices (into ``poly.folded()``) of rows with a_i^T x >= b_i - epsilon."""
    M, c = poly.folded()
    return np.flatnonzero(M @ np.asarray(x, dtype=float) >= c - epsilon)


def tangent_cone_generators(poly: ScaledPolyhedron, x, epsilon: float,
                            default: DirectionSet) -> DirectionSet:
    active = eps_active(poly, x, epsilon)
    if active.size == 0:
        return default
    B = poly.folded()[0][active]
    r, n = B.shape
    _, s, Vt = np.linalg.svd(B)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    if rank < r:
        raise DegenerateActiveSetError(
            f"{r} epsilon-active rows have rank {rank}; degenerate cones are not "
            "supported, use linear_mode='penalty'"
        )
    # columns of B^T (B B^T)^{-1} map onto the unit vectors of the active rows
    inward = -np.linalg.solve(B @ B.T, B).T
    null = Vt[rank:]
    gens = np.vstack([inward.T, null, -null])
    return DirectionSet(gens / np.linalg.norm(gens, axis=1)[:, None])


def in_X(poly: ScaledPolyhedron, x) -> bool:
    x = np.asarray(x, dtype=float)
    if np.any(x < poly.lower - MEMBERSHIP_SLACK) or np.any(x > poly.upper + MEMBERSHIP_SLACK):
        return False
    return bool(np.all(poly.A_bar @ x <= poly.b_bar + MEMBERSHIP_SLACK))
