"""Scenario records, level classification, and checked outcome assembly."""

import numpy as np
import pytest

from hypergameopt import fan
from hypergameopt.errors import PerceivedProblemNotSolved
from hypergameopt.hypergame import PerceptionScenario, assemble_outcome, hypergame_level
from hypergameopt.scenarios import (
    evaluate_fan_scenario,
    fan_scenario,
    normalized_budget_use,
    perceived_fan_game,
)


def test_scenario_validation(params):
    with pytest.raises(ValueError):
        PerceptionScenario(params, attacker_mode="wrong")
    with pytest.raises(ValueError):
        PerceptionScenario(params, defender_belief="wrong")
    with pytest.raises(ValueError):
        PerceptionScenario(params, budget=-1.0)
    with pytest.raises(ValueError):
        PerceptionScenario(params, attacker_mode="constraint_break",
                           break_weights=np.zeros(1))
    with pytest.raises(ValueError):
        PerceptionScenario(params, attacker_mode="constraint_powermax",
                           defender_belief="normal",
                           attacker_anticipates_defender=True)


def test_hypergame_levels(params):
    cases = [
        (("none", "normal", False), "game"),
        (("none", "anticipates_powermax", False), "first_level"),
        (("theta_perception", "normal", False), "second_level"),
        (("constraint_break", "anticipates_break", False), "second_level"),
        (("constraint_powermax", "anticipates_powermax", True), "third_level"),
    ]
    for (mode, belief, db), expected in cases:
        sc = fan_scenario(params, mode, belief, db)
        report = hypergame_level(sc)
        assert report.level == expected
        assert report.rationale


def test_assemble_outcome_checks_defender_kkt(params, baseline):
    sc = fan_scenario(params, "none", "normal")
    pert = {"d_theta": np.zeros(3)}
    game = perceived_fan_game(sc, pert)
    out = assemble_outcome(sc, pert, baseline.action, game=game)
    assert out.true_cost == pytest.approx(out.perceived_cost, abs=1e-12)
    assert out.violation == 0.0
    with pytest.raises(PerceivedProblemNotSolved):
        assemble_outcome(sc, pert, baseline.action + 0.05, game=game)


def test_no_attack_outcome_equals_baseline(params, baseline):
    sc = fan_scenario(params, "none", "normal")
    out = evaluate_fan_scenario(sc)
    assert out.true_cost == pytest.approx(baseline.power, abs=1e-9)
    assert np.allclose(out.perturbation["d_theta"], 0.0)
    assert out.budget_use() == 0.0


def test_powermax_outcome_through_checked_path(params):
    sc = fan_scenario(params, "constraint_powermax", "normal")
    out = evaluate_fan_scenario(sc)
    assert out.true_cost == pytest.approx(17.76, abs=0.05)
    assert out.perceived_cost == out.true_cost
    # the aggregation recorded the perceived-problem residuals it checked
    assert max(out.solver_diagnostics["perceived_problem"]) <= 1e-6


def test_outcome_evaluation_is_repeatable(params):
    sc = fan_scenario(params, "constraint_break", "normal")
    a = evaluate_fan_scenario(sc)
    b = evaluate_fan_scenario(sc)
    assert a.true_cost == b.true_cost
    assert np.array_equal(a.defender_action, b.defender_action)
    assert np.array_equal(a.perturbation["d_c"], b.perturbation["d_c"])


def test_unaware_perceived_cost_matches_solver_objective(params):
    sc = fan_scenario(params, "theta_perception", "normal")
    out = evaluate_fan_scenario(sc)
    theta_hat = params.theta_arr + out.perturbation["d_theta"]
    m, p = out.defender_action
    assert out.perceived_cost == pytest.approx(fan.power(m, p, theta_hat), abs=1e-9)


def test_normalized_budget_use_relative_for_thermal_params():
    from hypergameopt import hvac

    params = hvac.HvacParams(horizon=5)
    sc = PerceptionScenario(params, attacker_mode="hvac_static", budget=0.1)
    use = normalized_budget_use(sc, {"d_beta": -0.4 * params.beta,
                                     "d_gamma": 0.3 * params.gamma})
    assert use == pytest.approx(0.5 * (0.4 ** 2 + 0.3 ** 2), abs=1e-12)
    sc2 = PerceptionScenario(params, attacker_mode="hvac_dynamic", budget=0.5)
    use2 = normalized_budget_use(sc2, {"d_t0": np.full(5, 0.2)})
    assert use2 == pytest.approx(0.5 * 5 * 0.04, abs=1e-12)


def test_fan_budget_use_within_budget(params):
    for mode, belief, db in [("theta_perception", "normal", False),
                             ("constraint_powermax", "normal", False),
                             ("constraint_powermax", "anticipates_powermax", True)]:
        sc = fan_scenario(params, mode, belief, db)
        out = evaluate_fan_scenario(sc)
        assert normalized_budget_use(sc, out.perturbation) <= sc.budget + 1e-8
