"""Solver-level behavior: smooth solves, residual reports, relaxation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergameopt import fan
from hypergameopt.errors import DimensionMismatch, Infeasible
from hypergameopt.nlp import (
    Block,
    KktPoint,
    NlpProblem,
    RelaxationSchedule,
    check_gradient,
    kkt_residual,
    solve_mpec,
    solve_nlp,
)


def quadratic_problem(n=2):
    return NlpProblem(
        n,
        objective=lambda x: float(x @ x),
        gradient=lambda x: 2.0 * x,
        name="quadratic")


def test_unconstrained_quadratic_exact():
    pt = solve_nlp(quadratic_problem(), np.array([1.0, 1.0]), tol=1e-9, n_starts=1)
    assert np.allclose(pt.x, 0.0, atol=1e-9)
    assert pt.stationarity_residual <= 1e-9
    assert pt.feas_residual == 0.0
    assert pt.comp_residual == 0.0


def test_fan_baseline_from_generic_start(params):
    prob = fan.fan_nlp(params.theta_arr, params.c_arr)
    pt = solve_nlp(prob, np.array([3.0, 3.0]), tol=1e-8)
    assert pt.x[0] == pytest.approx(2.06, abs=0.02)
    assert pt.x[1] == pytest.approx(3.85, abs=0.02)
    assert pt.objective == pytest.approx(13.97, abs=0.05)


def test_fan_baseline_matches_boundary_scan(params, baseline):
    # independent oracle: scan the envelope boundary by angle
    phi = np.linspace(0.0, 2.0 * np.pi, 1_000_000, endpoint=False)
    m = params.c_m + params.c_r * np.cos(phi)
    p = params.c_p + params.c_r * np.sin(phi)
    power = params.theta_arr[0] * m + params.theta_arr[1] * m * m + params.theta_arr[2] * p
    best = np.argmin(power)
    assert abs(m[best] - baseline.m) <= 1e-3
    assert abs(p[best] - baseline.p) <= 1e-3
    assert power[best] >= baseline.power - 1e-9


def test_kkt_residual_solved_point(params):
    prob = fan.fan_nlp(params.theta_arr, params.c_arr)
    pt = solve_nlp(prob, np.array([3.0, 3.0]), tol=1e-8, n_starts=1)
    report = kkt_residual(prob, pt)
    assert report.max_residual <= 1e-6


def test_kkt_residual_detects_dropped_multiplier(params, baseline):
    prob = fan.fan_nlp(params.theta_arr, params.c_arr)
    point = KktPoint(x=baseline.action, lambda_eq=np.zeros(0),
                     lambda_ineq=np.zeros(1), stationarity_residual=0.0,
                     feas_residual=0.0, comp_residual=0.0)
    report = kkt_residual(prob, point)
    # active constraint, nonzero objective gradient, zero multiplier
    assert report.stationarity > 1.0


def test_kkt_residual_feasibility_matches_direct_evaluation(params, baseline):
    prob = fan.fan_nlp(params.theta_arr, params.c_arr)
    x = baseline.action + np.array([0.1, 0.0])
    point = fan.fan_kkt_point(params.theta_arr, params.c_arr, x[0], x[1])
    report = kkt_residual(prob, point)
    direct = fan.envelope(x[0], x[1], params.c_arr)
    assert report.feasibility == pytest.approx(max(0.0, direct), abs=1e-12)


def test_dimension_mismatch():
    prob = quadratic_problem()
    with pytest.raises(DimensionMismatch):
        solve_nlp(prob, np.zeros(3))
    good = solve_nlp(prob, np.zeros(2), n_starts=1)
    bad = KktPoint(x=np.zeros(3), lambda_eq=good.lambda_eq,
                   lambda_ineq=good.lambda_ineq, stationarity_residual=0,
                   feas_residual=0, comp_residual=0)
    with pytest.raises(DimensionMismatch):
        kkt_residual(prob, bad)


def test_check_gradient_linear_exact():
    prob = NlpProblem(3, objective=lambda x: float(x @ [1.0, 2.0, 3.0]),
                      gradient=lambda x: np.array([1.0, 2.0, 3.0]))
    assert check_gradient(prob, np.array([0.3, -2.0, 5.0])) < 1e-10


def test_check_gradient_flags_wrong_derivative():
    prob = NlpProblem(1, objective=lambda x: float(x[0] ** 2),
                      gradient=lambda x: np.array([3.0 * x[0]]))
    assert check_gradient(prob, np.array([1.0])) > 1e-2


def test_infeasible_problem_raises():
    prob = NlpProblem(
        1, objective=lambda x: float(x[0]), gradient=lambda x: np.ones(1),
        ineq_constraints=(
            Block(lambda x: np.array([x[0] - 1.0, -x[0] - 1.0, 1.0 - x[0] + x[0] * 0]),
                  lambda x: np.array([[1.0], [-1.0], [0.0]]), 3, "contradictory"),))
    with pytest.raises(Infeasible):
        solve_nlp(prob, np.zeros(1), n_starts=1, max_outer=12)


def test_solve_mpec_requires_pairs():
    with pytest.raises(ValueError):
        solve_mpec(quadratic_problem(), np.zeros(2))


def test_solve_mpec_stationary_start_returned_unchanged():
    # min (x0-1)^2 with x0 >= 0, x1 >= 0, x0*x1 = 0; (1, 0) is stationary
    # and complementarity-feasible, so the solve returns it as-is.
    prob = NlpProblem(
        2,
        objective=lambda x: float((x[0] - 1.0) ** 2),
        gradient=lambda x: np.array([2.0 * (x[0] - 1.0), 0.0]),
        nonneg_exprs=(Block(lambda x: x.copy(), lambda x: np.eye(2), 2, "coords"),),
        comp_pairs=((0, 1),),
        lower=np.zeros(2), upper=np.full(2, np.inf))
    x0 = np.array([1.0, 0.0])
    pt = solve_mpec(prob, x0)
    assert np.array_equal(pt.x, x0)
    assert pt.comp_residual <= 1e-12


def test_relaxation_schedule_validation():
    with pytest.raises(ValueError):
        RelaxationSchedule(eps0=1e-10, final_comp_tol=1e-8)
    with pytest.raises(ValueError):
        RelaxationSchedule(shrink=1.5)
    with pytest.raises(ValueError):
        RelaxationSchedule(growth=0.5)


def test_determinism_bitwise(params):
    prob = fan.constraint_attack_nlp(params, "powermax")
    x0 = np.concatenate([np.zeros(3), [2.0, 4.0]])
    a = solve_nlp(prob, x0, tol=1e-6, n_starts=4)
    b = solve_nlp(prob, x0, tol=1e-6, n_starts=4)
    assert np.array_equal(a.x, b.x)
    assert a.objective == b.objective


def test_objective_scaling_invariance(params, baseline):
    scaled = fan.FanParams(theta=(10.0, 10.0, 20.0))
    pt = fan.fan_baseline(scaled)
    assert abs(pt.m - baseline.m) <= 1e-6
    assert abs(pt.p - baseline.p) <= 1e-6


@given(a=st.floats(0.5, 4.0), b=st.floats(0.5, 4.0), c=st.floats(-1.0, 1.0))
@settings(max_examples=10, deadline=None, derandomize=True)
def test_convex_quadratic_stationarity(a, b, c):
    H = np.array([[a, c * min(a, b) * 0.5], [c * min(a, b) * 0.5, b]])

    prob = NlpProblem(
        2,
        objective=lambda x: 0.5 * float(x @ H @ x) + float(x @ [1.0, -2.0]),
        gradient=lambda x: H @ x + np.array([1.0, -2.0]))
    pt = solve_nlp(prob, np.array([3.0, -3.0]), tol=1e-7, n_starts=1)
    assert pt.stationarity_residual <= 1e-7
    expected = np.linalg.solve(H, -np.array([1.0, -2.0]))
    assert np.allclose(pt.x, expected, atol=1e-6)
