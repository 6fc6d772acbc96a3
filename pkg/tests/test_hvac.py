"""HVAC controller: baseline structure, simulation identities, attacks."""

import numpy as np
import pytest

from hypergameopt import hvac
from hypergameopt.acceptance import _hvac_runs
from hypergameopt.errors import MissingDuals


@pytest.fixture(scope="module")
def hvac5():
    return _hvac_runs(5)


def test_baseline_structure(hvac5):
    base, _static, _dynamic = hvac5
    params = hvac.HvacParams(horizon=5)
    assert np.allclose(base.controls.m, params.m_lower, atol=1e-6)
    assert np.allclose(base.controls.d, params.d_lower, atol=1e-6)
    # chill only at the final step; supply equals chiller output throughout
    assert np.allclose(base.controls.t_s, base.controls.t_sn, atol=1e-6)
    assert base.controls.t_sn[-1] < base.controls.t_sn[0] - 1.0
    assert base.total_power == pytest.approx(14.79, abs=0.05)


def test_baseline_duals(hvac5):
    base, _s, _d = hvac5
    params = hvac.HvacParams(horizon=5)
    lam = base.duals["lambda"]
    # chilling step pins the thermal multiplier at nu_c * c_p / beta
    assert lam[-1] == pytest.approx(params.nu_c * params.c_p / params.beta, rel=1e-4)
    assert np.all(np.diff(lam) > 0)
    assert hvac.lambda_mean(base) == pytest.approx(np.mean(lam))


def test_lambda_mean_requires_duals(hvac5):
    base, _s, _d = hvac5
    bare = hvac.simulate_true_trajectory(hvac.HvacParams(horizon=5), base.controls)
    with pytest.raises(MissingDuals):
        hvac.lambda_mean(bare)
    ones = hvac.simulate_true_trajectory(
        hvac.HvacParams(horizon=5), base.controls,
        duals={"lambda": np.ones(5)})
    assert hvac.lambda_mean(ones) == 1.0


def test_simulation_zero_perturbation_matches_controller(hvac5):
    base, _s, _d = hvac5
    # with no attack the controller's predicted states obey the true physics
    assert np.max(np.abs(base.t_n_true - base.t_n_perceived)) <= 1e-6
    assert np.max(np.abs(base.t_i_true - base.t_i_perceived)) <= 1e-6


def test_energy_accounting_identity(hvac5):
    base, (out, traj), _d = hvac5
    for t in (base, traj):
        total = t.power_fan + t.power_heater + t.power_zonal + t.power_chiller
        assert np.max(np.abs(t.per_step_power - total)) <= 1e-10
        assert t.total_power == pytest.approx(float(np.sum(total)), abs=1e-10)


def test_duct_temperature_is_pairwise_consistent(hvac5):
    base, _s, _d = hvac5
    params = hvac.HvacParams(horizon=5)
    mix = (base.controls.d * params.t_outside
           + (1.0 - base.controls.d) * base.t_n_true)
    assert np.allclose(base.t_i_true, np.maximum(base.controls.t_s, mix), atol=1e-9)


def test_static_attack_structure(hvac5):
    _base, (out, traj), _d = hvac5
    params = hvac.HvacParams(horizon=5)
    db, dg = out.perturbation["d_beta"], out.perturbation["d_gamma"]
    assert db < 0 and dg > 0
    use = 0.5 * ((db / params.beta) ** 2 + (dg / params.gamma) ** 2)
    assert use == pytest.approx(params.delta_max, abs=1e-8)
    # thermal multiplier follows the perceived coefficient
    assert hvac.lambda_mean(traj) == pytest.approx(
        params.nu_c * params.c_p / (params.beta + db), rel=0.01)
    stat, feas, comp = traj.diagnostics["attack_mpec"]
    assert max(stat, feas) <= 1e-6
    assert comp <= 1e-8


def test_static_attack_consequences(hvac5):
    base, (out, traj), _d = hvac5
    assert out.true_cost > base.total_power
    assert out.true_cost > out.perceived_cost
    # perceived endpoint holds; the true zone lands somewhere else
    t_init = hvac.HvacParams(horizon=5).t_zone_initial
    assert abs(traj.t_n_perceived[-1] - t_init) <= 1e-6
    assert abs(traj.t_n_true[-1] - t_init) > 1e-6
    # controller overcompensates at the end: true ends below perceived
    assert traj.delta_t_zone[-1] < 0


def test_attack_states_match_forward_simulation(hvac5):
    _base, (out, traj), (out_d, traj_d) = hvac5
    params = hvac.HvacParams(horizon=5)
    for t in (traj, traj_d):
        t_n, t_i = hvac.simulate_true_states(params, t.controls)
        assert np.max(np.abs(t_n - t.t_n_true)) <= 1e-7
        assert np.max(np.abs(t_i - t.t_i_true)) <= 1e-7


def test_dynamic_attack_structure(hvac5):
    _base, _s, (out, traj) = hvac5
    params = hvac.HvacParams(horizon=5)
    dt0 = out.perturbation["d_t0"]
    assert np.all(dt0[:-1] > 0)
    assert abs(dt0[-1]) < 0.2 * np.mean(np.abs(dt0[:-1]))
    assert 0.5 * float(dt0 @ dt0) == pytest.approx(params.dynamic_budget, abs=1e-8)
    # believed-hot outside air makes the true heater engage before the end
    assert np.all(traj.power_heater[:-1] > 0.01)
    assert hvac.lambda_mean(traj) == pytest.approx(219.0, rel=0.05)


def test_dynamic_beats_static(hvac5):
    _base, (s_out, _), (d_out, _) = hvac5
    assert d_out.true_cost >= s_out.true_cost


def test_zero_budget_attacks_return_baseline():
    params = hvac.HvacParams(horizon=5, delta_max=0.0, delta_t_max=0.0)
    base = hvac.hvac_baseline(params)
    s_out, _ = hvac.hvac_static_attack(params)
    d_out, _ = hvac.hvac_dynamic_attack(params)
    assert s_out.true_cost == pytest.approx(base.total_power, abs=1e-9)
    assert d_out.true_cost == pytest.approx(base.total_power, abs=1e-9)
    assert s_out.perturbation == {"d_beta": 0.0, "d_gamma": 0.0}
    assert np.array_equal(d_out.perturbation["d_t0"], np.zeros(5))


def test_params_validation():
    with pytest.raises(ValueError):
        hvac.HvacParams(horizon=1)
    with pytest.raises(ValueError):
        hvac.HvacParams(m_lower=5.0, m_upper=4.0)
    with pytest.raises(ValueError):
        hvac.HvacParams(t_zone_initial=50.0)
    with pytest.raises(ValueError):
        hvac.HvacParams(nu_c=0.0)
    with pytest.raises(ValueError):
        hvac.attack_problem(hvac.HvacParams(), "nonsense")
