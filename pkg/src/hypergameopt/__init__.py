"""Hypergame attack/defense optimization for optimal controllers.

Two bundled test systems: a static fan power-minimization problem inside a
circular operating envelope, and a single-zone HVAC model-predictive
controller. Attackers manipulate the defender's perception of objective or
constraint parameters; defenders may anticipate; outcomes are evaluated on
the true system.
"""

from .fan import FanParams, FanSolution
from .hvac import HvacParams, HvacTrajectory
from .hypergame import (
    AttackOutcome,
    PerceptionScenario,
    assemble_outcome,
    hypergame_level,
)
from .nlp import (
    Block,
    KktPoint,
    NlpProblem,
    RelaxationSchedule,
    check_gradient,
    kkt_residual,
    solve_mpec,
    solve_nlp,
)
from .robustness import RobustnessCertificate, ThetaLinearModel

__all__ = [
    "AttackOutcome",
    "Block",
    "FanParams",
    "FanSolution",
    "HvacParams",
    "HvacTrajectory",
    "KktPoint",
    "NlpProblem",
    "PerceptionScenario",
    "RelaxationSchedule",
    "RobustnessCertificate",
    "ThetaLinearModel",
    "assemble_outcome",
    "check_gradient",
    "hypergame_level",
    "kkt_residual",
    "solve_mpec",
    "solve_nlp",
]

__version__ = "0.1.0"
