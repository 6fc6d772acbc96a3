"""Exception types shared across the package."""


class HypergameOptError(Exception):
    """Base class for all package errors."""


class MaxIterations(HypergameOptError):
    """Solver ran out of iterations before reaching the requested tolerance."""


class Infeasible(HypergameOptError):
    """No feasible point was found (restoration failed)."""


class NonFiniteEvaluation(HypergameOptError):
    """Objective or constraint evaluated to nan/inf."""


class DimensionMismatch(HypergameOptError):
    """Vector lengths do not match the problem definition."""


class RelaxationStalled(HypergameOptError):
    """Complementarity residual stopped decreasing across relaxation rounds."""


class NewtonDiverged(HypergameOptError):
    """A closed-form Newton solve failed to converge."""


class SingularDualSystem(HypergameOptError):
    """The 2x2 dual recovery system is numerically singular."""


class NoFeasibleStart(HypergameOptError):
    """Multi-start search produced no feasible candidate."""


class PerceivedProblemNotSolved(HypergameOptError):
    """Defender action does not satisfy the perceived problem's KKT conditions."""


class MissingDuals(HypergameOptError):
    """Requested dual variables are not attached to the trajectory."""


class NotAKktPoint(HypergameOptError):
    """Point fails the KKT feasibility check required by the analysis."""


class NotThetaLinear(HypergameOptError):
    """Objective is not of the required parameter-linear form."""


class ActiveSetDegenerate(HypergameOptError):
    """Strict complementarity fails (an active constraint has zero multiplier)."""


class SingularKktJacobian(HypergameOptError):
    """The KKT system Jacobian used for sensitivities is singular."""


class RankDeficientT(HypergameOptError):
    """Pseudo-inverse of the active-gradient matrix failed its rank tolerance."""


class MissingSeries(HypergameOptError):
    """A figure was requested for a result that lacks the needed series."""


class ParseError(HypergameOptError):
    """Scenario file could not be parsed."""


class UnknownMode(HypergameOptError):
    """Scenario names an attack mode or belief the system does not define."""


class SolverFailure(HypergameOptError):
    """One or more scenario solves failed; see per-scenario attribution."""
