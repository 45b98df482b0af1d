import json
import math

import numpy as np
import pytest

from logds.audit import check_trace
from logds.merit import Problem, ProblemError
from logds.polyhedral import DirectionSet
from logds.solver import (SolverConfig, forcing, init, penalty_update, poll_step, run,
                          search_step, step3_update)


def _sq(x0=1.0, **kw):
    return Problem(1, lambda x: x[0] ** 2, [x0], **kw)


def _const_obj(v):
    return Problem(1, lambda x: v, [0.0])


@pytest.mark.parametrize("f0, rho", [(50.0, 0.02), (2.0, 0.1), (0.0, 0.1), (-200.0, 0.005)])
def test_init_rho_ext(f0, rho):
    st = init(_const_obj(f0))
    assert st.rho_ext == pytest.approx(rho, rel=1e-15)
    assert st.rho_log == 0.1 and st.alpha == 1.0 and st.eval_count == 1


def test_init_rejects_nonfinite_objective():
    with pytest.raises(ProblemError):
        init(_const_obj(math.inf))


def test_forcing():
    assert forcing(1.0, 1e-9) == 1e-9
    assert forcing(0.5, 1e-9) == pytest.approx(2.5e-10, rel=1e-15)
    assert forcing(1e-8, 1e-9) / 1e-8 < 1e-16


@pytest.mark.parametrize("kw", [dict(phi=0.5), dict(theta_alpha=1.0), dict(gamma=0.0),
                                dict(beta=1.0), dict(zeta=1.0), dict(nu=1.0), dict(max_evals=0),
                                dict(linear_mode="other")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_poll_success():
    st = init(_sq(1.0), SolverConfig(alpha0=0.5))
    d = poll_step(st, DirectionSet(np.array([[-1.0], [1.0]])))
    assert d[0] == -1.0 and st.x[0] == 0.5 and st.alpha == 0.5


def test_poll_failure():
    st = init(_sq(0.0), SolverConfig(alpha0=0.5))
    assert poll_step(st, DirectionSet(np.array([[1.0], [-1.0]]))) is None
    assert st.x[0] == 0.0 and st.alpha == 0.25 and st.eval_count == 3


def test_poll_skips_outside_bounds_without_evaluating():
    st = init(_sq(0.0, lower=[0.0], upper=[10.0]), SolverConfig(alpha0=0.5))
    poll_step(st, DirectionSet(np.array([[-1.0]])))
    assert st.eval_count == 1


def test_search_example():
    prob = Problem(1, lambda x: (x[0] - 3.0) ** 2, [0.0])
    st = init(prob, SolverConfig(alpha0=1.0))
    for x in (1.0, -1.0):
        st.evaluate(np.array([x]))
    assert search_step(st)
    assert st.x[0] == pytest.approx(2.0, abs=1e-9)
    assert st.merit == pytest.approx(1.0, abs=1e-8) and st.alpha == 1.0


def test_search_declines_with_too_little_history():
    st = init(_sq(1.0))
    assert not search_step(st)
    assert st.eval_count == 1


def test_search_projects_onto_bounds():
    prob = Problem(1, lambda x: (x[0] - 3.0) ** 2, [0.0], lower=[-1.0], upper=[0.5])
    st = init(prob)
    st.evaluate(np.array([-0.5]))
    st.evaluate(np.array([-1.0]))
    assert search_step(st)
    assert st.x[0] == 0.5


def test_failed_search_keeps_alpha():
    st = init(_sq(0.0))
    st.evaluate(np.array([1.0]))
    st.evaluate(np.array([-1.0]))
    assert not search_step(st, oracle=lambda s: np.array([0.5]))
    assert st.alpha == 1.0 and st.eval_count == 4


# (alpha_prev, alpha_next, rho_log, rho_ext, g_min) -> (log_test, ext_test)
STEP3 = [
    ((2e-3, 1e-3, 0.1, 0.1, 0.5), (True, True)),
    ((1e-3, 1e-3, 0.1, 0.1, 0.5), (False, False)),
    ((2e-3, 1e-3, 0.1, 0.1, 0.01), (False, False)),
]


@pytest.mark.parametrize("case, expected", STEP3)
def test_penalty_update_examples(case, expected):
    ap, an, rl, re, gm = case
    rl2, re2, lt, et = penalty_update(an, ap, rl, re, gm, 1 + 1e-9, 1e-2)
    assert (lt, et) == expected
    assert rl2 == (rl * 1e-2 if lt else rl) and re2 == (re * 1e-2 if et else re)


def test_step3_uses_state_g_min():
    prob = Problem(1, lambda x: 0.0, [0.0], ineq=(lambda x: x[0] - 0.5,))
    st = init(prob)
    rl, re = step3_update(st, 1e-3, 2e-3)
    assert (rl, re) == (1e-3, 1e-3)
    prob = Problem(1, lambda x: 0.0, [0.0], ineq=(lambda x: x[0] - 0.01,))
    assert step3_update(init(prob), 1e-3, 2e-3) == (0.1, 0.1)


def test_run_unconstrained_quadratic():
    res = run(_sq(1.0))
    assert res.status == "alpha-tol"
    assert abs(res.best.x[0]) <= 10 * res.config.alpha_tol
    assert check_trace(res) == []


def test_run_budget_one():
    res = run(_sq(1.0), SolverConfig(max_evals=1))
    assert res.status == "budget" and res.evals == 1 and res.best.x[0] == 1.0
    assert res.trace == []


def test_run_respects_budget():
    prob = Problem(2, lambda x: (x[0] - 1) ** 2 + 10 * (x[1] - x[0] ** 2) ** 2, [0.0, 0.0])
    res = run(prob, SolverConfig(max_evals=57))
    assert res.evals <= 57 and len(res.history) == res.evals
    assert check_trace(res) == []


def test_run_no_search_still_converges():
    prob = Problem(2, lambda x: (x[0] - 1) ** 2 + (x[1] + 2) ** 2, [0.0, 0.0])
    res = run(prob, SolverConfig(search_enabled=False))
    np.testing.assert_allclose(res.best.x, [1.0, -2.0], atol=1e-6)


def test_trace_json_fields():
    prob = Problem(1, lambda x: x[0] ** 2, [1.0], ineq=(lambda x: x[0] - 3,))
    res = run(prob, SolverConfig(max_evals=30))
    rec = json.loads(res.trace[0].to_json())
    assert list(rec) == ["k", "kind", "x", "merit", "alpha_before", "alpha_after",
                         "rho_log_before", "rho_log_after", "rho_ext_before", "rho_ext_after",
                         "g_min", "evals_used"]


def test_empty_log_set_gives_infinite_g_min():
    res = run(_sq(1.0), SolverConfig(max_evals=20))
    assert all(t.g_min == math.inf for t in res.trace)
    assert json.loads(res.trace[0].to_json())["g_min"] is None


def test_summary_has_both_best_points():
    prob = Problem(1, lambda x: x[0], [0.0], eq=(lambda x: x[0] - 1,))
    res = run(prob, SolverConfig(max_evals=200))
    s = res.summary()
    assert "best_feasible" in s and "x" in s
