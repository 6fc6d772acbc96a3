"""Fan system: reference rows, closed-form cross-checks, attack structure."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergameopt import fan
from hypergameopt.nlp import solve_mpec


def test_baseline_row(baseline):
    assert baseline.m == pytest.approx(2.06, abs=0.02)
    assert baseline.p == pytest.approx(3.85, abs=0.02)
    assert baseline.power == pytest.approx(13.97, abs=0.05)
    assert baseline.lam > 0
    assert "nlp_cross_check" in baseline.diagnostics


def test_true_manipulation_row(params):
    sol = fan.fan_theta_true_attack(params)
    assert sol.m == pytest.approx(2.02, abs=0.02)
    assert sol.p == pytest.approx(3.94, abs=0.02)
    assert sol.power == pytest.approx(16.68, abs=0.05)
    assert np.allclose(sol.delta_theta, [0.150, 0.303, 0.292], atol=0.01)


def test_true_manipulation_budget_identity(params):
    sol = fan.fan_theta_true_attack(params)
    assert 0.5 * float(sol.delta_theta @ sol.delta_theta) == pytest.approx(
        params.delta_theta_max, abs=1e-12)


def test_perception_row(params):
    out = fan.fan_theta_perception_attack(params, branch="best")
    m, p = out.defender_action
    assert m == pytest.approx(2.29, abs=0.02)
    assert p == pytest.approx(3.38, abs=0.02)
    assert out.true_cost == pytest.approx(14.26, abs=0.05)
    assert out.perceived_cost == pytest.approx(12.42, abs=0.05)
    assert np.allclose(out.perturbation["d_theta"], [-0.090, -0.411, 0.151],
                       atol=0.01)


def test_perception_best_branch_is_positive(params):
    best = fan.fan_theta_perception_attack(params, branch="best")
    pos = fan.fan_theta_perception_attack(params, branch="positive")
    neg = fan.fan_theta_perception_attack(params, branch="negative")
    assert best.solver_diagnostics["branch"] == "positive"
    assert best.true_cost == pytest.approx(pos.true_cost, abs=1e-10)
    assert pos.true_cost > neg.true_cost


def test_faulty_anticipation_row(params):
    sol = fan.fan_theta_defender_aware(params)
    assert sol.m == pytest.approx(1.95, abs=0.02)
    assert sol.p == pytest.approx(4.16, abs=0.02)
    assert sol.power == pytest.approx(14.08, abs=0.05)
    assert sol.diagnostics["perceived_power"][0] == pytest.approx(14.71, abs=0.05)


def test_defender_aware_recovery_consistency(params):
    # observe coefficients produced by an actual attack, then reconstruct
    atk = fan.fan_theta_perception_attack(params, branch="positive")
    theta_hat = params.theta_arr + atk.perturbation["d_theta"]
    rec = fan.anticipate_theta_attack(theta_hat, params)
    # the anticipated shifts satisfy the assumed attack model at theta_hat
    d, tau = fan.perception_deltas(rec.m_hat, rec.p_hat, params, sign=1.0)
    assert np.allclose(rec.d_theta_anticipated, d, atol=1e-10)
    assert np.allclose(rec.theta_tilde, theta_hat - d, atol=1e-12)


def test_double_bluff_row(params):
    out = fan.fan_theta_double_bluff(params)
    m, p = out.defender_action
    assert m == pytest.approx(1.89, abs=0.02)
    assert p == pytest.approx(4.42, abs=0.02)
    assert out.true_cost == pytest.approx(14.30, abs=0.05)
    assert out.perceived_cost == pytest.approx(13.76, abs=0.05)
    # the attacker spends the whole budget
    d = out.perturbation["d_theta"]
    assert 0.5 * float(d @ d) == pytest.approx(params.delta_theta_max, abs=1e-6)


def test_double_bluff_stacked_residuals(params):
    out = fan.fan_theta_double_bluff(params)
    d = out.perturbation["d_theta"]
    mh, ph, _ = out.solver_diagnostics["anticipated_action"]
    m, p = out.defender_action
    theta = params.theta_arr
    th_hat = theta + d
    q = 4.0 * (ph - params.c_p) ** 2 * mh ** 2 + params.c_r ** 2
    tau = np.sqrt(2.0 * params.delta_theta_max / q)
    a = np.array([tau * (ph - params.c_p), 2 * tau * (ph - params.c_p) * mh,
                  -tau * (mh - params.c_m)])
    th_til = th_hat - a
    residuals = [
        fan.envelope(mh, ph, params.c_arr),
        (ph - params.c_p) * (th_hat[0] + 2 * th_hat[1] * mh)
        - (mh - params.c_m) * th_hat[2],
        fan.envelope(m, p, params.c_arr),
        (p - params.c_p) * (th_til[0] + 2 * th_til[1] * m)
        - (m - params.c_m) * th_til[2],
        tau - np.sqrt(2.0 * params.delta_theta_max / q),
        max(0.0, 0.5 * float(d @ d) - params.delta_theta_max),
    ]
    assert max(abs(r) for r in residuals) <= 1e-6


def test_zero_budget_reproduces_baseline(baseline):
    z = fan.FanParams(delta_theta_max=0.0, delta_c_max=0.0)
    for action in (
            fan.fan_theta_true_attack(z).action,
            fan.fan_theta_perception_attack(z).defender_action,
            fan.fan_theta_double_bluff(z).defender_action,
            fan.fan_constraint_attack(z, "powermax", "unaware").defender_action,
            fan.fan_constraint_attack(z, "break", "double_bluff").defender_action):
        assert np.allclose(action, baseline.action, atol=1e-6)


def test_powermax_unaware_row(params):
    out = fan.fan_constraint_attack(params, "powermax", "unaware")
    assert out.defender_action[0] == pytest.approx(2.59, abs=0.02)
    assert out.defender_action[1] == pytest.approx(4.22, abs=0.02)
    assert out.true_cost == pytest.approx(17.76, abs=0.05)
    assert out.violation == 0.0
    assert np.allclose(out.perturbation["d_c"], [0.301, 0.097, 0.316], atol=0.01)
    assert out.perceived_cost == out.true_cost


def test_break_unaware_row(params):
    out = fan.fan_constraint_attack(params, "break", "unaware")
    assert out.defender_action[0] == pytest.approx(1.58, abs=0.02)
    assert out.defender_action[1] == pytest.approx(3.36, abs=0.02)
    assert out.true_cost == pytest.approx(10.79, abs=0.05)
    assert out.violation == pytest.approx(2.20, abs=0.05)
    assert np.allclose(out.perturbation["d_c"], [-0.285, -0.137, -0.316], atol=0.01)


def test_mirror_property(params):
    pm = fan.fan_constraint_attack(params, "powermax", "unaware")
    bk = fan.fan_constraint_attack(params, "break", "unaware")
    assert np.all(np.sign(pm.perturbation["d_c"]) == -np.sign(bk.perturbation["d_c"]))


def test_aware_defender_inverts_same_mode_attack(params, baseline):
    # inversion is exact up to the attacker-solve tolerance
    for mode in ("powermax", "break"):
        out = fan.fan_constraint_attack(params, mode, "aware")
        assert np.allclose(out.defender_action, baseline.action, atol=1e-4)
        assert out.violation <= 1e-5


def test_powermax_double_bluff_row(params):
    out = fan.fan_constraint_attack(params, "powermax", "double_bluff")
    assert out.defender_action[0] == pytest.approx(2.16, abs=0.02)
    assert out.defender_action[1] == pytest.approx(3.94, abs=0.02)
    assert out.true_cost == pytest.approx(14.71, abs=0.05)
    assert out.envelope_deviation == pytest.approx(0.406, abs=0.05)
    d = out.perturbation["d_c"]
    assert np.allclose(d, [0.419, 0.157, 0.0], atol=0.01)
    assert 0.5 * float(d @ d) == pytest.approx(params.delta_c_max, abs=1e-6)


def test_break_double_bluff_row(params):
    out = fan.fan_constraint_attack(params, "break", "double_bluff")
    assert out.defender_action[0] == pytest.approx(2.05, abs=0.02)
    assert out.defender_action[1] == pytest.approx(3.87, abs=0.02)
    assert out.true_cost == pytest.approx(13.97, abs=0.05)
    assert out.envelope_deviation == pytest.approx(0.003, abs=0.05)
    assert np.allclose(out.perturbation["d_c"], [-0.295, -0.113, -0.316], atol=0.01)


def test_cross_cases(params):
    no_break = fan.fan_cross_case(params, "none", "break")
    assert no_break.true_cost == pytest.approx(17.76, abs=0.05)
    assert no_break.violation == 0.0

    bk_pm = fan.fan_cross_case(params, "break", "powermax")
    assert bk_pm.defender_action[0] == pytest.approx(1.17, abs=0.02)
    assert bk_pm.defender_action[1] == pytest.approx(2.78, abs=0.02)
    assert bk_pm.true_cost == pytest.approx(8.11, abs=0.05)

    pm_bk = fan.fan_cross_case(params, "powermax", "break")
    assert pm_bk.true_cost == pytest.approx(22.21, abs=0.05)

    no_pm = fan.fan_cross_case(params, "none", "powermax")
    assert no_pm.defender_action[0] == pytest.approx(1.57, abs=0.02)
    assert no_pm.defender_action[1] == pytest.approx(3.37, abs=0.02)
    assert no_pm.true_cost == pytest.approx(10.79, abs=0.05)


def test_perception_closed_form_vs_relaxation(params, baseline):
    out = fan.fan_theta_perception_attack(params, branch="best")
    x0 = np.concatenate([np.zeros(3), baseline.action, [baseline.lam]])
    pt = solve_mpec(fan.perception_attack_mpec(params), x0, n_starts=8)
    assert np.max(np.abs(out.perturbation["d_theta"] - pt.x[0:3])) <= 1e-4
    assert np.max(np.abs(out.defender_action - pt.x[3:5])) <= 1e-4
    assert pt.comp_residual <= 1e-8


def test_powermax_closed_form_vs_relaxation(params, baseline):
    out = fan.fan_constraint_attack(params, "powermax", "unaware")
    x0 = np.concatenate([np.zeros(3), baseline.action, [baseline.lam]])
    pt = solve_mpec(fan.powermax_attack_mpec(params), x0, n_starts=8)
    assert np.max(np.abs(out.defender_action - pt.x[3:5])) <= 1e-4
    assert pt.comp_residual <= 1e-8


def test_every_action_sits_on_perceived_boundary(params):
    cases = [
        fan.fan_theta_perception_attack(params).defender_action,
        fan.fan_constraint_attack(params, "powermax", "unaware"),
        fan.fan_constraint_attack(params, "break", "unaware"),
    ]
    out = cases[1]
    c_hat = fan._c_hat(params.c_arr, out.perturbation["d_c"])
    m, p = out.defender_action
    assert abs(fan.envelope(m, p, c_hat)) <= 1e-6


def test_budget_tightness_of_attacks(params):
    for out in (fan.fan_theta_perception_attack(params),
                fan.fan_constraint_attack(params, "powermax", "unaware"),
                fan.fan_constraint_attack(params, "break", "unaware")):
        use = out.budget_use()
        assert params.delta_c_max - 1e-6 <= use <= params.delta_c_max + 1e-8


@given(t1=st.floats(0.5, 3.0), t2=st.floats(0.5, 3.0), t3=st.floats(0.5, 3.0),
       scale=st.floats(0.1, 50.0))
@settings(max_examples=10, deadline=None, derandomize=True)
def test_baseline_argmin_scale_invariant(t1, t2, t3, scale):
    a = fan.fan_baseline(fan.FanParams(theta=(t1, t2, t3)), cross_check=False)
    b = fan.fan_baseline(fan.FanParams(theta=(scale * t1, scale * t2, scale * t3)),
                         cross_check=False)
    assert abs(a.m - b.m) <= 1e-7
    assert abs(a.p - b.p) <= 1e-7


def test_invalid_params():
    with pytest.raises(ValueError):
        fan.FanParams(theta=(-1.0, 1.0, 2.0))
    with pytest.raises(ValueError):
        fan.FanParams(c_r=0.0)
    with pytest.raises(ValueError):
        fan.FanParams(delta_c_max=-0.1)
    with pytest.raises(ValueError):
        fan.fan_constraint_attack(fan.FanParams(), "nonsense", "unaware")
