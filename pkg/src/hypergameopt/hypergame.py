"""Who perceives what: scenario descriptions and outcome assembly.

A scenario names the true parameters, the attacker's manipulation mode, the
defender's belief about being attacked, and the attack budget. The defender
acts on its perceived problem; consequences are always evaluated on the true
one, so perceived and true cost can differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import PerceivedProblemNotSolved
from .nlp import KktPoint, NlpProblem, kkt_residual

ATTACKER_MODES = (
    "none",
    "theta_true",
    "theta_perception",
    "constraint_powermax",
    "constraint_break",
    "hvac_static",
    "hvac_dynamic",
)

DEFENDER_BELIEFS = (
    "normal",
    "anticipates_theta",
    "anticipates_powermax",
    "anticipates_break",
)


@dataclass(frozen=True)
class PerceptionScenario:
    """Hypergame structure: true parameters plus each side's information."""

    true_params: Any
    attacker_mode: str = "none"
    defender_belief: str = "normal"
    attacker_anticipates_defender: bool = False
    budget: float = 0.0
    break_weights: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self) -> None:
        if self.attacker_mode not in ATTACKER_MODES:
            raise ValueError(f"unknown attacker_mode {self.attacker_mode!r}")
        if self.defender_belief not in DEFENDER_BELIEFS:
            raise ValueError(f"unknown defender_belief {self.defender_belief!r}")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        w = np.atleast_1d(np.asarray(self.break_weights, dtype=float))
        if np.any(w < 0):
            raise ValueError("break_weights must be nonnegative")
        if self.attacker_mode == "constraint_break" and not np.any(w > 0):
            raise ValueError("constraint_break needs at least one positive weight")
        if self.attacker_anticipates_defender and self.defender_belief == "normal":
            raise ValueError("a double-bluff requires a non-normal defender belief")
        object.__setattr__(self, "break_weights", w)


@dataclass
class AttackOutcome:
    """What actually happened: perturbation, action, and both cost views.

    `violation` is max_l max(0, g_l(u, c_true)); `weighted_violation` is the
    signed weighted sum used by break-mode attackers; `envelope_deviation` is
    its magnitude, i.e. how far the defender lands from the true envelope
    boundary regardless of side.
    """

    perturbation: dict[str, Any]
    defender_action: np.ndarray
    true_cost: float
    perceived_cost: float
    violation: float
    weighted_violation: float = 0.0
    envelope_deviation: float = 0.0
    solver_diagnostics: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def budget_use(self) -> float:
        """Half squared norm of all perturbation entries (normalized upstream)."""
        total = 0.0
        for v in self.perturbation.values():
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            total += float(arr @ arr)
        return 0.5 * total


@dataclass(frozen=True)
class HypergameLevel:
    level: str
    rationale: str


def hypergame_level(scenario: PerceptionScenario) -> HypergameLevel:
    """Classify the scenario's hypergame level.

    Mapping (a documented convention): no attacker and a normal defender play
    the plain game. No attacker but a defender that anticipates one is a
    first-level hypergame: the defender misperceives and nobody knows. A real
    attacker against an unaware defender is a second-level hypergame (the
    attacker knows about the misperception it created), as is an aware
    defender reverse-engineering a real attack. A double bluff, where the
    attacker counter-anticipates the aware defender, adds one more level.
    """
    attacked = scenario.attacker_mode != "none"
    aware = scenario.defender_belief != "normal"
    if scenario.attacker_anticipates_defender:
        return HypergameLevel("third_level",
                              "attacker optimizes against the defender's counter-inference")
    if not attacked and not aware:
        return HypergameLevel("game", "no misperception on either side")
    if not attacked and aware:
        return HypergameLevel("first_level",
                              "defender misperceives (anticipates a non-existent attack) "
                              "and neither player is aware of it")
    if attacked and not aware:
        return HypergameLevel("second_level",
                              "attacker is aware of the misperception it induces")
    return HypergameLevel("second_level",
                          "defender is aware of the attack and inverts it")


@dataclass(frozen=True)
class PerceivedGame:
    """What the defender believes it is solving, plus true-side evaluators."""

    problem: NlpProblem
    point_builder: Callable[[np.ndarray], KktPoint]
    perceived_cost: Callable[[np.ndarray], float]
    true_cost: Callable[[np.ndarray], float]
    true_constraints: Callable[[np.ndarray], np.ndarray]   # g(u, c_true), <= 0 when safe


def assemble_outcome(
    scenario: PerceptionScenario,
    attacker_perturbation: dict[str, Any],
    defender_action: np.ndarray,
    game: PerceivedGame | None = None,
    kkt_tol: float = 1e-6,
    diagnostics: dict[str, tuple[float, float, float]] | None = None,
) -> AttackOutcome:
    """Aggregate a hypergame outcome from its per-player solutions.

    The defender's action must solve its perceived problem: the KKT residual
    on `game.problem` is checked against `kkt_tol` before anything is
    evaluated on the true game. When `game` is omitted it is built from the
    scenario (fan scenarios only).
    """
    if game is None:
        from .scenarios import perceived_fan_game

        game = perceived_fan_game(scenario, attacker_perturbation)
    u = np.asarray(defender_action, dtype=float)
    point = game.point_builder(u)
    report = kkt_residual(game.problem, point)
    if report.max_residual > kkt_tol:
        raise PerceivedProblemNotSolved(
            f"defender action has perceived-problem KKT residual "
            f"{report.max_residual:.3e} > {kkt_tol:.1e}")

    g_true = np.atleast_1d(game.true_constraints(u))
    w = scenario.break_weights
    if w.size != g_true.size:
        w = np.full(g_true.size, w[0] if w.size else 1.0)
    outcome = AttackOutcome(
        perturbation=dict(attacker_perturbation),
        defender_action=u,
        true_cost=float(game.true_cost(u)),
        perceived_cost=float(game.perceived_cost(u)),
        violation=float(np.max(np.maximum(0.0, g_true), initial=0.0)),
        weighted_violation=float(w @ g_true),
        envelope_deviation=float(np.max(np.abs(g_true), initial=0.0)),
        solver_diagnostics=dict(diagnostics or {}),
    )
    outcome.solver_diagnostics.setdefault(
        "perceived_problem",
        (report.stationarity, report.feasibility, report.complementarity))
    return outcome
