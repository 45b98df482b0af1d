"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import csv
import functools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from logds import bank
from logds.audit import check_trace
from logds.cli import main as cli_main
from logds.merit import merit_from_values
from logds.polyhedral import (DegenerateActiveSetError, default_directions, eps_active,
                              scale_rows, tangent_cone_generators)
from logds.profiles import ProfileTable, data_profile, performance_profile, convergence_eval_count, RunHistory
from logds.solver import SolverConfig, _accept, init, penalty_update, run, step3_update
from logds.surrogates import SampleSet, build_model, quadratic_cap, simplex_gradient

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    print(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@functools.cache
def suite_runs():
    out = {}
    for name in bank.builtin_names():
        for mode in ("penalty", "conforming"):
            out[name, mode] = run(bank.get_builtin(name), SolverConfig(linear_mode=mode))
    return out


# ---- 1-3: end-to-end solves ----------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    res = run(bank.get_builtin("hs12-like"))
    dt = time.perf_counter() - t0
    bf = res.best_feasible
    rel = math.inf if bf is None else abs(bf.f + 30.0) / 30.0
    viol = math.inf if bf is None else bf.violation
    ok = bf is not None and viol <= 1e-4 and rel <= 1e-3 and res.evals <= 2000 and dt < 5.0
    record(1, ok, f"hs12-like f={bf.f:.8g} rel.err={rel:.2e} viol={viol:.1e} "
                  f"evals={res.evals} time={dt:.2f}s")
    return ok


def criterion_2():
    res = run(bank.get_builtin("hs21-like"))
    bf = res.best_feasible
    ok = bf is not None and bf.f <= -99.95 and bf.violation <= 1e-4 and res.evals <= 2000
    record(2, ok, f"hs21-like f={bf.f:.8g} viol={bf.violation:.1e} evals={res.evals}")
    return ok


def criterion_3():
    res = run(bank.get_builtin("circle-eq"))
    bf = res.best_feasible
    err = abs(bf.f + math.sqrt(2.0))
    ok = bf is not None and bf.violation <= 1e-4 and err <= 1e-2 and res.evals <= 2000
    record(3, ok, f"circle-eq f={bf.f:.8g} |f-f*|={err:.1e} viol={bf.violation:.1e} "
                  f"evals={res.evals}")
    return ok


# ---- 4: trace invariants -----------------------------------------------------------------

def criterion_4():
    problems = []
    iters = 0
    for (name, mode), res in suite_runs().items():
        iters += len(res.trace)
        problems += [f"{name}/{mode}: {m}" for m in check_trace(res)]
    ok = not problems
    detail = f"{len(suite_runs())} runs, {iters} iterations, {len(problems)} violations"
    if problems:
        detail += "; first: " + problems[0]
    record(4, ok, detail)
    return ok


# ---- 5: step-3 table -----------------------------------------------------------------------

INF = math.inf
# (alpha_prev, alpha_next, rho_log, rho_ext, g_min) -> (rho_log test, rho_ext test)
STEP3_TABLE = [
    ((2e-3, 1e-3, 0.1, 0.1, 0.5), (True, True)),
    ((1e-3, 1e-3, 0.1, 0.1, 0.5), (False, False)),       # no contraction
    ((1e-3, 2e-3, 0.1, 0.1, 0.5), (False, False)),       # expansion
    ((2e-3, 1e-3, 0.1, 0.1, 0.01), (False, False)),      # g_min^2 = 1e-4 too small
    ((2e-3, 1e-3, 0.1, 0.1, 0.03), (False, False)),      # g_min^2 = 9e-4 too small
    ((2e-3, 1e-3, 0.1, 1e-4, 0.5), (True, False)),       # rho_ext^beta blocks ext only
    ((2e-3, 1e-3, 1e-4, 0.1, 0.5), (False, False)),      # rho_log^beta blocks both
    ((2e-3, 1e-3, 0.1, 10.0, 0.5), (True, True)),        # large rho_ext irrelevant
    ((2e-3, 1e-3, 0.1, 0.1, INF), (True, True)),         # empty barrier set
    ((2e-3, 1e-3, 1e-4, 0.1, INF), (False, False)),      # empty barrier set, rho_log small
    ((0.5, 0.25, 1.0, 1.0, 0.5), (True, True)),          # alpha_next == g_min^2 exactly
    ((0.5, 0.2500001, 1.0, 1.0, 0.5), (False, False)),   # just above g_min^2
    ((2.0, 1.0, 1.0, 1.0, INF), (True, True)),           # 1^beta == 1
    ((1.0, 0.5, 0.5, 0.5, INF), (False, False)),         # 0.5^beta < 0.5
    ((1.0, 0.4999999, 0.5, 0.5, INF), (True, True)),     # just below 0.5^beta
    ((1.0, 0.4999999, 0.5, 0.4, INF), (True, False)),    # rho_ext^beta < alpha_next
]
BETA, ZETA = 1.0 + 1e-9, 1e-2


def criterion_5():
    bad = []
    for case, (want_log, want_ext) in STEP3_TABLE:
        ap, an, rl, re, gm = case
        rl2, re2, lt, et = penalty_update(an, ap, rl, re, gm, BETA, ZETA)
        if (lt, et) != (want_log, want_ext):
            bad.append(case)
        if rl2 != (ZETA * rl if want_log else rl) or re2 != (ZETA * re if want_ext else re):
            bad.append(case)
    # the state-level wrapper reads g_min = +inf on a problem with no barrier constraints
    state = init(bank.get_builtin("circle-eq"))
    if step3_update(state, 1e-3, 2e-3) != (ZETA * 0.1, ZETA * state.rho_ext):
        bad.append("state wrapper")
    ok = not bad
    record(5, ok, f"{len(STEP3_TABLE)} cases + state wrapper, mismatches: {bad or 'none'}")
    return ok


# ---- 6: surrogate exactness ------------------------------------------------------------------

def criterion_6():
    rng = np.random.default_rng(6)
    worst_interp = worst_mfn = worst_sg = 0.0
    declined = 0
    for trial in range(400):
        n = 1 + trial % 4
        H = rng.normal(size=(n, n))
        H = H + H.T
        g, c = rng.normal(size=n), rng.normal()
        center = rng.normal(size=n)
        r = 10.0 ** rng.uniform(-3, 1)
        # interpolation on a full quadratic sample
        P = center + r * rng.uniform(-1, 1, size=(quadratic_cap(n), n))
        S = P - center
        f = c + S @ g + 0.5 * np.einsum("ij,jk,ik->i", S, H, S)
        m = build_model(SampleSet(P, f, center, r))
        if m is None:
            declined += 1
        else:
            pred = np.array([m(p) for p in P])
            worst_interp = max(worst_interp, np.max(np.abs(pred - f)) / max(1e-300, np.max(np.abs(f))))
        # MFN on affine data with n+1 <= p < q points
        p = rng.integers(n + 1, quadratic_cap(n)) if quadratic_cap(n) > n + 1 else n + 1
        P = center + r * rng.uniform(-1, 1, size=(p, n))
        m = build_model(SampleSet(P, c + (P - center) @ g, center, r))
        if m is None:
            declined += 1
        else:
            worst_mfn = max(worst_mfn, np.linalg.norm(m.H))
        # simplex gradient on affine merit data, n affinely independent steps
        steps = rng.normal(size=(n, n))
        if np.linalg.cond(steps) > 1e3:
            continue
        P = np.vstack([center, center + r * steps])
        est = simplex_gradient(SampleSet(P, c + (P - center) @ g, center, r))
        worst_sg = max(worst_sg, np.max(np.abs(est - g)))
    ok = declined == 0 and worst_interp <= 1e-8 and worst_mfn <= 1e-8 and worst_sg <= 1e-10
    record(6, ok, f"interp rel.err={worst_interp:.1e} MFN ||H||_F={worst_mfn:.1e} "
                  f"simplex-grad err={worst_sg:.1e} declined={declined}")
    return ok


# ---- 7: profile oracle ---------------------------------------------------------------------

def _oracle(t, n_p):
    P, S = t.shape
    perf, data = [], []
    for s in range(S):
        ratios = [t[p, s] / min(t[p]) for p in range(P) if math.isfinite(t[p, s])]
        bps = sorted(set(ratios))
        perf.append((bps, [sum(r <= b for r in ratios) / P for b in bps]))
        ks = [t[p, s] / (n_p[p] + 1.0) for p in range(P) if math.isfinite(t[p, s])]
        bps = sorted(set(ks))
        data.append((bps, [sum(k <= b for k in ks) / P for b in bps]))
    return perf, data


def criterion_7():
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(100):
        t = rng.integers(1, 80, size=(10, 3)).astype(float)
        t[rng.random((10, 3)) < 0.3] = math.inf
        n_p = rng.integers(1, 10, size=10)
        tab = ProfileTable([f"p{i}" for i in range(10)], ["a", "b", "c"], t, n_p, 0.1)
        perf, data = performance_profile(tab), data_profile(tab)
        operf, odata = _oracle(t, n_p)
        for j, s in enumerate(tab.solvers):
            for got, want in ((perf[s], operf[j]), (data[s], odata[j])):
                if got.breakpoints.tolist() != want[0] or got.values.tolist() != want[1]:
                    mismatches += 1
    hist = RunHistory("p", "s", range(1, 38), [20.0] * 36 + [1.0], [0.0] * 37)
    boundary = convergence_eval_count(hist, 10.0, 0.0, 0.1)
    ok = mismatches == 0 and boundary == 37
    record(7, ok, f"100 tables, {mismatches} mismatches; boundary case t={boundary:g}")
    return ok


# ---- 8: polyhedral properties ------------------------------------------------------------

def criterion_8():
    rng = np.random.default_rng(8)
    set_mismatch = 0
    dev = 0.0
    cone_viol = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        A = rng.normal(size=(k, n))
        x = rng.normal(size=n)
        b = A @ x + np.where(rng.random(k) < 0.7, 0.0, rng.uniform(0, 1, size=k))
        c = 10.0 ** rng.uniform(-6, 6, size=k)
        p1, p2 = scale_rows(A, b), scale_rows(A * c[:, None], b * c)
        dev = max(dev, np.max(np.abs(p1.A_bar - p2.A_bar)), np.max(np.abs(p1.b_bar - p2.b_bar)))
        a1, a2 = eps_active(p1, x, 1e-5), eps_active(p2, x, 1e-5)
        if a1.tolist() != a2.tolist():
            set_mismatch += 1
            continue
        d0 = default_directions(n)
        g1 = tangent_cone_generators(p1, x, 1e-5, d0)
        g2 = tangent_cone_generators(p2, x, 1e-5, d0)
        if g1.dirs.shape != g2.dirs.shape:
            set_mismatch += 1
            continue
        dev = max(dev, np.max(np.abs(g1.dirs - g2.dirs)))
        if a1.size:
            cone_viol = max(cone_viol, np.max(p1.A_bar[a1] @ g1.dirs.T))
    try:
        tangent_cone_generators(scale_rows([[1.0, 0.0], [-2.0, 0.0]], [0.0, 0.0]),
                                np.zeros(2), 1e-5, default_directions(2))
        raised = False
    except DegenerateActiveSetError:
        raised = True
    ok = set_mismatch == 0 and dev <= 1e-12 and cone_viol <= 1e-10 and raised
    record(8, ok, f"1000 rescalings: active sets identical={set_mismatch == 0}, "
                  f"max float deviation={dev:.1e}; max a_i^T g={cone_viol:.1e}; "
                  f"degenerate error raised={raised}")
    return ok


# ---- 9: barrier contract -----------------------------------------------------------------

def criterion_9():
    rng = np.random.default_rng(9)
    checked, leaks = 0, []
    for name in bank.builtin_names():
        state = init(bank.get_builtin(name))
        log = list(state.partition.log_set)
        if not log:
            continue
        work = state.problem
        found = 0
        while found < 1000:
            x = work.x0 + rng.uniform(-10, 10, size=work.n)
            f, g, h = work.evaluate(x)
            if not np.any(g[log] >= 0):
                continue
            found += 1
            z, status = merit_from_values(f, g, h, state.partition, state.params)
            rec = type(state.current)(x, f, g, h, z, 0.0, 0)
            if z != math.inf or _accept(state, rec):
                leaks.append((name, x))
        checked += found
    # no such point may become an iterate in any suite run
    iterate_leaks = 0
    for res in suite_runs().values():
        log = list(res.partition.log_set)
        by_x = {r.x.tobytes(): r for r in res.history}
        for t in res.trace:
            rec = by_x[np.asarray(t.x).tobytes()]
            if log and np.any(rec.g[log] >= 0):
                iterate_leaks += 1
    ok = not leaks and iterate_leaks == 0
    record(9, ok, f"{checked} barrier-violating points, {len(leaks)} finite/accepted; "
                  f"{iterate_leaks} violating iterates")
    return ok


# ---- 10: ablation ----------------------------------------------------------------------

def criterion_10():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        code_b = cli_main(["bench", "--out", str(tmp / "bench")])
        hist = sorted((tmp / "bench" / "histories").glob("*.jsonl"))
        code_p = cli_main(["profile", "--histories", str(tmp / "bench" / "histories"),
                           "--out", str(tmp / "prof")])
        rows = list(csv.DictReader((tmp / "prof" / "profiles.csv").open())) if code_p == 0 else []
    dt = time.perf_counter() - t0
    solvers = {r["solver"] for r in rows}
    values_ok = bool(rows) and all(0.0 <= float(r["value"]) <= 1.0 for r in rows)
    expected = 2 * len(bank.builtin_names())
    ok = (code_b == 0 and code_p == 0 and len(hist) == expected and values_ok
          and solvers == {"logds-penalty", "logds-conforming"} and dt < 60.0)
    record(10, ok, f"{len(hist)}/{expected} runs, {len(rows)} CSV rows, "
                   f"solvers={sorted(solvers)}, time={dt:.1f}s")
    return ok


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
