"""Run-level invariant checks over a solver trace.

Each check returns human-readable violation messages; an empty list means
the run is clean.
"""
from __future__ import annotations

import numpy as np

from .polyhedral import in_X, scale_rows
from .solver import RunResult, forcing


def check_trace(result: RunResult) -> list[str]:
    cfg = result.config
    out: list[str] = []
    by_x = {rec.x.tobytes(): rec for rec in result.history}
    log_idx = list(result.partition.log_set)
    p = result.problem
    poly = scale_rows(p.A, p.b, p.lower, p.upper)

    if result.trace and result.trace[0].merit_start != result.initial_merit:
        out.append("k=0: starting merit differs from the merit at x0")
    prev = None
    for t in result.trace:
        where = f"k={t.k}"
        # (a) merit monotone at fixed penalties, sufficient decrease at successes
        if t.kind == "unsuccessful":
            if t.merit != t.merit_start:
                out.append(f"{where}: unsuccessful iteration changed merit")
        elif not (t.merit <= t.merit_start - forcing(t.alpha_before, cfg.gamma)
                  and t.merit < t.merit_start):
            out.append(f"{where}: success without sufficient decrease")
        if prev is not None:
            if (prev.rho_log_after, prev.rho_ext_after) != (t.rho_log_before, t.rho_ext_before):
                out.append(f"{where}: penalty parameters not carried over")
            if (prev.rho_log_before, prev.rho_ext_before) == (prev.rho_log_after, prev.rho_ext_after) \
                    and t.merit_start != prev.merit:
                out.append(f"{where}: incumbent merit changed between iterations at fixed rho")
            if prev.alpha_after != t.alpha_before:
                out.append(f"{where}: stepsize not carried over")
        # (b) penalties nonincreasing, every change exactly one factor zeta
        for name, before, after in (("rho_log", t.rho_log_before, t.rho_log_after),
                                    ("rho_ext", t.rho_ext_before, t.rho_ext_after)):
            if after != before and after != cfg.zeta * before:
                out.append(f"{where}: {name} changed by something other than zeta")
        log_moved = t.rho_log_after < t.rho_log_before
        ext_moved = t.rho_ext_after < t.rho_ext_before
        # (c) every rho_ext update is also a rho_log update
        if ext_moved and not log_moved:
            out.append(f"{where}: rho_ext updated without rho_log test passing")
        if (log_moved or ext_moved) and not (t.kind == "unsuccessful"
                                             and t.alpha_after < t.alpha_before):
            out.append(f"{where}: penalty update at a non-contracting iteration")
        # (d) iterates stay in X and strictly inside the barrier region
        x = np.asarray(t.x, dtype=float)
        rec = by_x.get(x.tobytes())
        if rec is None:
            out.append(f"{where}: iterate was never evaluated")
        else:
            if not in_X(poly, x):
                out.append(f"{where}: iterate outside X")
            if log_idx and not np.all(rec.g[log_idx] < 0):
                out.append(f"{where}: iterate violates a barrier constraint")
        prev = t

    if len(result.history) > cfg.max_evals:
        out.append("evaluation budget exceeded")
    if [r.eval_index for r in result.history] != list(range(1, len(result.history) + 1)):
        out.append("evaluation indices are not 1..N")
    return out

