"""Scenario-level drivers: run one hypergame scenario end to end.

Maps a PerceptionScenario onto the fan operations, assembles the outcome
through the checked aggregation path, and provides the budget normalization
used by the per-mode budget invariants.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from . import fan
from .errors import UnknownMode
from .hypergame import AttackOutcome, PerceivedGame, PerceptionScenario, assemble_outcome


def fan_scenario(params: fan.FanParams, attacker_mode: str = "none",
                 defender_belief: str = "normal",
                 double_bluff: bool = False) -> PerceptionScenario:
    """Scenario record for the fan system with the budget read off params."""
    if attacker_mode in ("theta_true", "theta_perception"):
        budget = params.delta_theta_max
    elif attacker_mode in ("constraint_powermax", "constraint_break"):
        budget = params.delta_c_max
    elif attacker_mode == "none":
        budget = (params.delta_theta_max if defender_belief == "anticipates_theta"
                  else params.delta_c_max)
    else:
        raise UnknownMode(f"{attacker_mode!r} is not a fan attack mode")
    return PerceptionScenario(
        true_params=params, attacker_mode=attacker_mode,
        defender_belief=defender_belief,
        attacker_anticipates_defender=double_bluff, budget=budget)


def _fan_believed_params(scenario: PerceptionScenario,
                         perturbation: dict[str, Any]) -> tuple[np.ndarray, np.ndarray]:
    """(theta, c) the defender believes to be true, given what it observes."""
    params: fan.FanParams = scenario.true_params
    theta, c = params.theta_arr, params.c_arr
    d_theta = np.asarray(perturbation.get("d_theta", np.zeros(3)), dtype=float)
    d_c = np.asarray(perturbation.get("d_c", np.zeros(3)), dtype=float)
    theta_obs = theta + d_theta
    c_obs = fan._c_hat(c, d_c)
    belief = scenario.defender_belief
    if belief == "normal":
        return theta_obs, c_obs
    if belief == "anticipates_theta":
        rec = fan.anticipate_theta_attack(theta_obs, params)
        return rec.theta_tilde, c_obs
    if belief == "anticipates_powermax":
        adjust = not (scenario.attacker_anticipates_defender
                      and scenario.attacker_mode == "constraint_powermax")
        rec = fan.anticipate_powermax_attack(theta, c_obs, params.delta_c_max,
                                             adjust_radius=adjust)
        return theta_obs, rec.c_tilde
    if belief == "anticipates_break":
        rec = fan.anticipate_break_attack(theta, c_obs, params.delta_c_max)
        return theta_obs, rec.c_tilde
    raise UnknownMode(f"{belief!r} is not a fan defender belief")


def perceived_fan_game(scenario: PerceptionScenario,
                       perturbation: dict[str, Any]) -> PerceivedGame:
    """The defender's perceived problem plus true-side evaluators."""
    params: fan.FanParams = scenario.true_params
    theta_believed, c_believed = _fan_believed_params(scenario, perturbation)
    # A manipulation of the true coefficients changes what "true cost" means.
    theta_true = params.theta_arr
    if scenario.attacker_mode == "theta_true":
        theta_true = theta_true + np.asarray(perturbation.get("d_theta", np.zeros(3)))
    c_true = params.c_arr
    return PerceivedGame(
        problem=fan.fan_nlp(theta_believed, c_believed, name="fan_perceived"),
        point_builder=lambda u: fan.fan_kkt_point(theta_believed, c_believed,
                                                  u[0], u[1]),
        perceived_cost=lambda u: fan.power(u[0], u[1], theta_believed),
        true_cost=lambda u: fan.power(u[0], u[1], theta_true),
        true_constraints=lambda u: np.array([fan.envelope(u[0], u[1], c_true)]),
    )


def evaluate_fan_scenario(scenario: PerceptionScenario,
                          branch: str = "best") -> AttackOutcome:
    """Solve the attacker and defender sides of a fan scenario and assemble
    the outcome (the defender action is re-checked against its perceived
    problem before true-side evaluation)."""
    params: fan.FanParams = scenario.true_params
    mode, belief = scenario.attacker_mode, scenario.defender_belief
    db = scenario.attacker_anticipates_defender

    if mode == "none":
        if belief == "normal":
            base = fan.fan_baseline(params)
            pert: dict[str, Any] = {"d_theta": np.zeros(3)}
            action = base.action
            diagnostics = dict(base.diagnostics)
        elif belief == "anticipates_theta":
            sol = fan.fan_theta_defender_aware(params)
            pert = {"d_theta": np.zeros(3)}
            action = sol.action
            diagnostics = dict(sol.diagnostics)
        else:
            out = fan.fan_cross_case(params, "none", belief.removeprefix("anticipates_"))
            pert = out.perturbation
            action = out.defender_action
            diagnostics = out.solver_diagnostics
    elif mode == "theta_true":
        sol = fan.fan_theta_true_attack(params)
        pert = {"d_theta": sol.delta_theta}
        action = sol.action
        diagnostics = dict(sol.diagnostics)
    elif mode == "theta_perception":
        if db:
            out = fan.fan_theta_double_bluff(params)
        elif belief == "anticipates_theta":
            atk = fan.fan_theta_perception_attack(params, branch=branch)
            rec = fan.anticipate_theta_attack(
                params.theta_arr + atk.perturbation["d_theta"], params)
            m, p = fan.solve_envelope_system(rec.theta_tilde, params.c_arr)
            out = fan._theta_outcome(params, atk.perturbation["d_theta"],
                                     rec.theta_tilde, m, p)
        else:
            out = fan.fan_theta_perception_attack(params, branch=branch)
        pert = out.perturbation
        action = out.defender_action
        diagnostics = out.solver_diagnostics
    elif mode in ("constraint_powermax", "constraint_break"):
        short = mode.removeprefix("constraint_")
        matching = belief == f"anticipates_{short}"
        if db:
            out = fan.fan_constraint_attack(params, short, "double_bluff")
        elif belief == "normal":
            out = fan.fan_constraint_attack(params, short, "unaware")
        elif matching:
            out = fan.fan_constraint_attack(params, short, "aware")
        else:
            out = fan.fan_cross_case(params, short,
                                     belief.removeprefix("anticipates_"))
        pert = out.perturbation
        action = out.defender_action
        diagnostics = out.solver_diagnostics
    else:
        raise UnknownMode(f"{mode!r} is not a fan attack mode")

    return assemble_outcome(scenario, pert, action,
                            game=perceived_fan_game(scenario, pert),
                            diagnostics=diagnostics)


def normalized_budget_use(scenario: PerceptionScenario,
                          perturbation: dict[str, Any]) -> float:
    """Half squared perturbation norm in the units the budget is stated in:
    absolute for coefficient, envelope and temperature shifts, relative for
    the thermal parameters."""
    total = 0.0
    for key, value in perturbation.items():
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if key == "d_beta":
            arr = arr / scenario.true_params.beta
        elif key == "d_gamma":
            arr = arr / scenario.true_params.gamma
        total += float(arr @ arr)
    return 0.5 * total
