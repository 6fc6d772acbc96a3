"""Static fan test system: power minimization inside a circular envelope.

The defender minimizes theta1*m + theta2*m^2 + theta3*p subject to
0.5*((m - c_m)^2 + (p - c_p)^2 - c_r^2) <= 0. Attackers manipulate either the
observed objective coefficients (theta_hat = theta + d_theta) or the observed
envelope (c_m_hat = c_m + d_m, c_p_hat = c_p + d_p, c_r_hat = c_r - d_r; note
the radius sign), under a budget 0.5*||d||^2 <= delta.

Every variant is solved by its closed-form reduction (tiny Newton systems
with analytic Jacobians) and, where useful, cross-checked against the generic
NLP/complementarity path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NewtonDiverged, SingularDualSystem
from .hypergame import AttackOutcome
from .nlp import Block, KktPoint, NlpProblem, solve_nlp
from .util import newton

Array = np.ndarray


@dataclass(frozen=True)
class FanParams:
    theta: tuple[float, float, float] = (1.0, 1.0, 2.0)
    c_m: float = 5.0
    c_p: float = 5.0
    c_r: float = np.sqrt(10.0)
    delta_theta_max: float = 0.1
    delta_c_max: float = 0.1

    def __post_init__(self) -> None:
        if any(t < 0 for t in self.theta):
            raise ValueError("theta must be componentwise nonnegative")
        if self.c_r <= 0:
            raise ValueError("c_r must be positive")
        if self.delta_theta_max < 0 or self.delta_c_max < 0:
            raise ValueError("attack budgets must be nonnegative")

    @property
    def theta_arr(self) -> Array:
        return np.asarray(self.theta, dtype=float)

    @property
    def c_arr(self) -> Array:
        return np.array([self.c_m, self.c_p, self.c_r])


@dataclass
class FanSolution:
    m: float
    p: float
    power: float
    lam: float
    duals: dict[str, float] = field(default_factory=dict)
    delta_theta: Array | None = None
    diagnostics: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    @property
    def action(self) -> Array:
        return np.array([self.m, self.p])


def power(m: float, p: float, theta: Array) -> float:
    return float(theta[0] * m + theta[1] * m * m + theta[2] * p)


def envelope(m: float, p: float, c: Array) -> float:
    return 0.5 * ((m - c[0]) ** 2 + (p - c[1]) ** 2 - c[2] ** 2)


def fan_nlp(theta: Array, c: Array, name: str = "fan") -> NlpProblem:
    """The plain defender problem as a generic NLP."""
    theta = np.asarray(theta, dtype=float)
    c = np.asarray(c, dtype=float)

    def obj(x: Array) -> float:
        return power(x[0], x[1], theta)

    def grad(x: Array) -> Array:
        return np.array([theta[0] + 2.0 * theta[1] * x[0], theta[2]])

    def g(x: Array) -> Array:
        return np.array([envelope(x[0], x[1], c)])

    def gj(x: Array) -> Array:
        return np.array([[x[0] - c[0], x[1] - c[1]]])

    return NlpProblem(2, obj, grad, ineq_constraints=(Block(g, gj, 1, "envelope"),),
                      name=name)


def fan_kkt_point(theta: Array, c: Array, m: float, p: float) -> KktPoint:
    """KKT candidate at (m, p) with the envelope multiplier recovered from
    the p-stationarity equation (valid while p < c_p)."""
    lam = -theta[2] / (p - c[1])
    prob = fan_nlp(theta, c)
    g = envelope(m, p, c)
    grad = np.array([theta[0] + 2 * theta[1] * m + lam * (m - c[0]),
                     theta[2] + lam * (p - c[1])])
    return KktPoint(
        x=np.array([m, p]), lambda_eq=np.zeros(0), lambda_ineq=np.array([lam]),
        stationarity_residual=float(np.max(np.abs(grad))),
        feas_residual=max(0.0, g), comp_residual=abs(lam * g),
        objective=prob.objective(np.array([m, p])))


def solve_envelope_system(theta: Array, c: Array, x0: Array | None = None) -> tuple[float, float]:
    """Newton on the lambda-eliminated optimality system of the defender.

    (p - c_p)(theta1 + 2 theta2 m) - (m - c_m) theta3 = 0 and the envelope
    held with equality. The start sits on the lower-left boundary arc, which
    is the cost-minimizing side (the multiplier there is positive).
    """
    theta = np.asarray(theta, dtype=float)
    c = np.asarray(c, dtype=float)
    if x0 is None:
        x0 = np.array([c[0] - c[2] / np.sqrt(2.0), c[1] - c[2] / np.sqrt(2.0)])

    def fun(x: Array) -> Array:
        m, p = x
        return np.array([
            (p - c[1]) * (theta[0] + 2 * theta[1] * m) - (m - c[0]) * theta[2],
            envelope(m, p, c),
        ])

    def jac(x: Array) -> Array:
        m, p = x
        return np.array([
            [2 * theta[1] * (p - c[1]) - theta[2], theta[0] + 2 * theta[1] * m],
            [m - c[0], p - c[1]],
        ])

    try:
        m, p = newton(fun, jac, x0)
    except NewtonDiverged:
        pt = solve_nlp(fan_nlp(theta, c), x0, tol=1e-6, n_starts=8)
        m, p = pt.x
    return float(m), float(p)


def fan_baseline(params: FanParams, cross_check: bool = True) -> FanSolution:
    """Solve the unattacked defender problem.

    Newton on the reduced system; optionally cross-checked against the
    generic NLP solver (agreement to 1e-6).
    """
    theta, c = params.theta_arr, params.c_arr
    m, p = solve_envelope_system(theta, c)
    lam = -theta[2] / (p - c[1])
    if lam <= 0:
        raise NewtonDiverged("landed on the wrong boundary arc (lambda <= 0)")
    sol = FanSolution(m, p, power(m, p, theta), lam, duals={"lambda": lam})
    if cross_check:
        pt = solve_nlp(fan_nlp(theta, c), np.array([m, p]), tol=1e-6, n_starts=1)
        if np.max(np.abs(pt.x - sol.action)) > 1e-6:
            raise NewtonDiverged("reduced system and NLP solver disagree")
        sol.diagnostics["nlp_cross_check"] = pt.residuals()
    return sol


# ---------------------------------------------------------------------------
# objective-parameter attacks
# ---------------------------------------------------------------------------

def fan_theta_true_attack(params: FanParams) -> FanSolution:
    """Min-max game where the attacker perturbs the true coefficients.

    Reduces to a single-level robust counterpart: the defender minimizes
    J + sqrt(2 delta (m^2 + m^4 + p^2)) on the envelope. The attacker's
    budget is active, so d_theta = tau * (m, m^2, p) with
    tau = sqrt(2 delta / (m^2 + m^4 + p^2)).
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_theta_max
    if delta == 0.0:
        base = fan_baseline(params)
        base.delta_theta = np.zeros(3)
        return base

    def s_val(x: Array) -> float:
        m, p = x
        return m * m + m ** 4 + p * p

    def obj(x: Array) -> float:
        m, p = x
        return power(m, p, theta) + np.sqrt(2.0 * delta * s_val(x))

    def grad(x: Array) -> Array:
        m, p = x
        h = np.sqrt(2.0 * delta * s_val(x))
        return np.array([
            theta[0] + 2 * theta[1] * m + delta * (2 * m + 4 * m ** 3) / h,
            theta[2] + delta * 2 * p / h,
        ])

    def g(x: Array) -> Array:
        return np.array([envelope(x[0], x[1], c)])

    def gj(x: Array) -> Array:
        return np.array([[x[0] - c[0], x[1] - c[1]]])

    prob = NlpProblem(2, obj, grad, ineq_constraints=(Block(g, gj, 1, "envelope"),),
                      name="fan_theta_true")
    base = fan_baseline(params, cross_check=False)
    pt = solve_nlp(prob, base.action, tol=1e-6, n_starts=4)
    m, p = pt.x
    tau = np.sqrt(2.0 * delta / s_val(pt.x))
    d_theta = tau * np.array([m, m * m, p])
    theta_hat = theta + d_theta
    lam = -theta_hat[2] / (p - c[1])
    sol = FanSolution(float(m), float(p), power(m, p, theta_hat), lam,
                      duals={"lambda": lam, "tau": tau}, delta_theta=d_theta)
    sol.diagnostics["robust_counterpart"] = pt.residuals()
    return sol


def perception_deltas(m: float, p: float, params: FanParams, sign: float) -> tuple[Array, float]:
    """Attacker's optimal coefficient shifts at a given defender action."""
    c = params.c_arr
    delta = params.delta_theta_max
    q = 4.0 * (p - c[1]) ** 2 * m * m + c[2] ** 2
    tau = sign * np.sqrt(2.0 * delta / q)
    return np.array([tau * (p - c[1]), 2 * tau * (p - c[1]) * m, -tau * (m - c[0])]), tau


def _perception_branch(params: FanParams, sign: float) -> tuple[float, float]:
    """Newton on the lambda-eliminated attacked system for one tau-sign branch.

    On the envelope the attacker's shifts collapse the stationarity equation
    to the baseline one plus sign * sqrt(2 delta (4 (p-c_p)^2 m^2 + c_r^2)),
    which is what gets solved here together with the envelope equality.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_theta_max
    root2d = np.sqrt(2.0 * delta)

    def fun(x: Array) -> Array:
        m, p = x
        r = np.sqrt(4.0 * (p - c[1]) ** 2 * m * m + c[2] ** 2)
        return np.array([
            (p - c[1]) * (theta[0] + 2 * theta[1] * m) - (m - c[0]) * theta[2]
            + sign * root2d * r,
            envelope(m, p, c),
        ])

    def jac(x: Array) -> Array:
        m, p = x
        r = np.sqrt(4.0 * (p - c[1]) ** 2 * m * m + c[2] ** 2)
        return np.array([
            [2 * theta[1] * (p - c[1]) - theta[2]
             + sign * root2d * 4.0 * (p - c[1]) ** 2 * m / r,
             theta[0] + 2 * theta[1] * m
             + sign * root2d * 4.0 * (p - c[1]) * m * m / r],
            [m - c[0], p - c[1]],
        ])

    base = fan_baseline(params, cross_check=False)
    m, p = newton(fun, jac, base.action)
    return float(m), float(p)


def fan_theta_perception_attack(params: FanParams, branch: str = "best") -> AttackOutcome:
    """Attacker shifts the defender's perceived coefficients; defender unaware.

    `branch` picks the sign of tau (the two local attacker optima); "best"
    solves both and keeps the one with higher true cost.
    """
    theta = params.theta_arr
    if params.delta_theta_max == 0.0:
        return _theta_outcome(params, np.zeros(3), theta, *fan_baseline(params).action)

    candidates = {"positive": 1.0, "negative": -1.0}
    if branch != "best":
        candidates = {branch: candidates[branch]}
    results = []
    for name, sign in candidates.items():
        m, p = _perception_branch(params, sign)
        d_theta, _tau = perception_deltas(m, p, params, sign)
        results.append((power(m, p, theta), name, m, p, d_theta))
    results.sort(key=lambda r: -r[0])
    _, name, m, p, d_theta = results[0]
    out = _theta_outcome(params, d_theta, theta + d_theta, m, p)
    out.solver_diagnostics["branch"] = name
    return out


def _theta_outcome(params: FanParams, d_theta: Array, theta_belief: Array,
                   m: float, p: float) -> AttackOutcome:
    """Outcome record for a theta-mode attack: true cost at true theta,
    perceived cost at the coefficients the defender believes in."""
    theta, c = params.theta_arr, params.c_arr
    g_true = envelope(m, p, c)
    return AttackOutcome(
        perturbation={"d_theta": np.asarray(d_theta, dtype=float)},
        defender_action=np.array([m, p]),
        true_cost=power(m, p, theta),
        perceived_cost=power(m, p, theta_belief),
        violation=max(0.0, g_true),
        weighted_violation=g_true,
        envelope_deviation=abs(g_true),
    )


@dataclass
class ThetaRecovery:
    theta_tilde: Array
    d_theta_anticipated: Array
    m_hat: float
    p_hat: float


def anticipate_theta_attack(theta_hat: Array, params: FanParams) -> ThetaRecovery:
    """Reverse-engineer believed-true coefficients from observed ones.

    Assumes a perception attack with known budget and the positive-tau
    branch (the defender knows that branch pays the attacker more). The
    anticipated shifts depend only on the observed-coefficient solution
    (m_hat, p_hat), not on the defender's final action.
    """
    c = params.c_arr
    m_hat, p_hat = solve_envelope_system(np.asarray(theta_hat, dtype=float), c)
    d_theta, _tau = perception_deltas(m_hat, p_hat, params, sign=1.0)
    return ThetaRecovery(np.asarray(theta_hat, dtype=float) - d_theta,
                         d_theta, m_hat, p_hat)


def fan_theta_defender_aware(params_observed: FanParams,
                             true_theta: Array | None = None) -> FanSolution:
    """Defender anticipates a perception attack on the observed coefficients.

    Solves the (m_hat, p_hat) system once at theta_hat, subtracts the
    anticipated shifts, then solves the resulting convex problem. The
    returned power is evaluated at `true_theta` (defaults to the observed
    coefficients, i.e. the faulty-anticipation case with no actual attack).
    """
    theta_hat, c = params_observed.theta_arr, params_observed.c_arr
    if params_observed.delta_theta_max == 0.0:
        return fan_baseline(params_observed)
    rec = anticipate_theta_attack(theta_hat, params_observed)
    if np.any(rec.theta_tilde < 0):
        raise NewtonDiverged("anticipated attack drives believed coefficients negative")
    m, p = solve_envelope_system(rec.theta_tilde, c)
    theta_eval = theta_hat if true_theta is None else np.asarray(true_theta, dtype=float)
    lam = -rec.theta_tilde[2] / (p - c[1])
    sol = FanSolution(m, p, power(m, p, theta_eval), lam,
                      duals={"lambda": lam}, delta_theta=rec.d_theta_anticipated)
    sol.diagnostics["perceived_power"] = (power(m, p, rec.theta_tilde), 0.0, 0.0)
    return sol


def theta_double_bluff_nlp(params: FanParams) -> NlpProblem:
    """Trilevel objective-coefficient attack as one stacked NLP.

    Variables: [d1, d2, d3, m_hat, p_hat, m, p]. Equalities stack the
    anticipated defender's system at theta_hat with the actual defender's
    system at theta_tilde = theta_hat - anticipated shifts.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_theta_max
    cm, cp, cr = c
    root2d = np.sqrt(2.0 * delta)

    def anticipated(mh: float, ph: float) -> tuple[Array, Array, Array]:
        """Anticipated shifts a(m_hat, p_hat) plus their (mh, ph) partials."""
        q = 4.0 * (ph - cp) ** 2 * mh * mh + cr * cr
        tau = root2d / np.sqrt(q)
        dq_dmh = 8.0 * (ph - cp) ** 2 * mh
        dq_dph = 8.0 * (ph - cp) * mh * mh
        dtau_dmh = -0.5 * tau * dq_dmh / q
        dtau_dph = -0.5 * tau * dq_dph / q
        a = np.array([tau * (ph - cp), 2 * tau * (ph - cp) * mh, -tau * (mh - cm)])
        da_dmh = np.array([
            dtau_dmh * (ph - cp),
            2 * (dtau_dmh * (ph - cp) * mh + tau * (ph - cp)),
            -(dtau_dmh * (mh - cm) + tau),
        ])
        da_dph = np.array([
            dtau_dph * (ph - cp) + tau,
            2 * (dtau_dph * (ph - cp) * mh + tau * mh),
            -dtau_dph * (mh - cm),
        ])
        return a, da_dmh, da_dph

    def split(x: Array):
        return x[0:3], x[3], x[4], x[5], x[6]

    def obj(x: Array) -> float:
        _, _, _, m, p = split(x)
        return -power(m, p, theta)

    def grad(x: Array) -> Array:
        _, _, _, m, p = split(x)
        g = np.zeros(7)
        g[5] = -(theta[0] + 2 * theta[1] * m)
        g[6] = -theta[2]
        return g

    def eqs(x: Array) -> Array:
        d, mh, ph, m, p = split(x)
        th_hat = theta + d
        a, _, _ = anticipated(mh, ph)
        th_til = th_hat - a
        return np.array([
            envelope(mh, ph, c),
            (ph - cp) * (th_hat[0] + 2 * th_hat[1] * mh) - (mh - cm) * th_hat[2],
            envelope(m, p, c),
            (p - cp) * (th_til[0] + 2 * th_til[1] * m) - (m - cm) * th_til[2],
        ])

    def eqs_jac(x: Array) -> Array:
        d, mh, ph, m, p = split(x)
        th_hat = theta + d
        a, da_dmh, da_dph = anticipated(mh, ph)
        th_til = th_hat - a
        J = np.zeros((4, 7))
        J[0, 3] = mh - cm
        J[0, 4] = ph - cp
        J[1, 0] = ph - cp
        J[1, 1] = 2 * mh * (ph - cp)
        J[1, 2] = -(mh - cm)
        J[1, 3] = 2 * th_hat[1] * (ph - cp) - th_hat[2]
        J[1, 4] = th_hat[0] + 2 * th_hat[1] * mh
        J[2, 5] = m - cm
        J[2, 6] = p - cp
        # eq4 via partials wrt theta_tilde
        dth = np.array([p - cp, 2 * m * (p - cp), -(m - cm)])
        J[3, 0:3] = dth                      # d theta_tilde / d d_i = identity
        J[3, 3] = -float(dth @ da_dmh)
        J[3, 4] = -float(dth @ da_dph)
        J[3, 5] = 2 * th_til[1] * (p - cp) - th_til[2]
        J[3, 6] = th_til[0] + 2 * th_til[1] * m
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, 7))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    return NlpProblem(
        7, obj, grad,
        eq_constraints=(Block(eqs, eqs_jac, 4, "stacked_system"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        name="fan_theta_double_bluff")


def fan_theta_double_bluff(params: FanParams, n_starts: int = 8) -> AttackOutcome:
    """Attacker optimizes against a defender known to anticipate the attack."""
    theta, c = params.theta_arr, params.c_arr
    if params.delta_theta_max == 0.0:
        base = fan_baseline(params)
        return _theta_outcome(params, np.zeros(3), theta, base.m, base.p)
    prob = theta_double_bluff_nlp(params)
    base = fan_baseline(params, cross_check=False)
    x0 = np.concatenate([np.zeros(3), base.action, base.action])
    pt = solve_nlp(prob, x0, tol=1e-6, n_starts=n_starts)
    d_theta = pt.x[0:3]
    # refine: the stacked solve fixes the perturbation; the defender's exact
    # response to it comes from the closed-form recovery chain
    rec = anticipate_theta_attack(theta + d_theta, params)
    m, p = solve_envelope_system(rec.theta_tilde, c)
    out = _theta_outcome(params, d_theta, rec.theta_tilde, m, p)
    out.solver_diagnostics["stacked_nlp"] = pt.residuals()
    out.solver_diagnostics["anticipated_action"] = (rec.m_hat, rec.p_hat, 0.0)
    return out


# ---------------------------------------------------------------------------
# constraint-parameter attacks
# ---------------------------------------------------------------------------

def _c_hat(c: Array, d_c: Array) -> Array:
    """Observed envelope parameters; the radius perturbation enters negatively."""
    return np.array([c[0] + d_c[0], c[1] + d_c[1], c[2] - d_c[2]])


def constraint_attack_nlp(params: FanParams, mode: str) -> NlpProblem:
    """Unaware-defender constraint attack with the defender's optimality
    conditions substituted as equalities.

    Variables: [d_m, d_p, d_r, m, p]. mode "powermax" maximizes true cost,
    "break" maximizes the true envelope function itself.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max
    cm, cp, _cr = c

    def split(x: Array):
        return x[0:3], x[3], x[4]

    if mode == "powermax":
        def obj(x: Array) -> float:
            _, m, p = split(x)
            return -power(m, p, theta)

        def grad(x: Array) -> Array:
            _, m, p = split(x)
            return np.array([0, 0, 0, -(theta[0] + 2 * theta[1] * m), -theta[2]])
    elif mode == "break":
        def obj(x: Array) -> float:
            _, m, p = split(x)
            return -envelope(m, p, c)

        def grad(x: Array) -> Array:
            _, m, p = split(x)
            return np.array([0, 0, 0, -(m - cm), -(p - cp)])
    else:
        raise ValueError(f"unknown constraint attack mode {mode!r}")

    def eqs(x: Array) -> Array:
        d, m, p = split(x)
        ch = _c_hat(c, d)
        return np.array([
            (p - ch[1]) * (theta[0] + 2 * theta[1] * m) - (m - ch[0]) * theta[2],
            envelope(m, p, ch),
        ])

    def eqs_jac(x: Array) -> Array:
        d, m, p = split(x)
        ch = _c_hat(c, d)
        J = np.zeros((2, 5))
        J[0, 0] = theta[2]
        J[0, 1] = -(theta[0] + 2 * theta[1] * m)
        J[0, 3] = 2 * theta[1] * (p - ch[1]) - theta[2]
        J[0, 4] = theta[0] + 2 * theta[1] * m
        J[1, 0] = -(m - ch[0])
        J[1, 1] = -(p - ch[1])
        J[1, 2] = ch[2]
        J[1, 3] = m - ch[0]
        J[1, 4] = p - ch[1]
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, 5))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    return NlpProblem(
        5, obj, grad,
        eq_constraints=(Block(eqs, eqs_jac, 2, "defender_system"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        name=f"fan_{mode}_unaware")


def solve_constraint_attack_unaware(params: FanParams, mode: str,
                                    n_starts: int = 8) -> tuple[Array, float, float, KktPoint]:
    """Optimal unaware-defender perturbation: (d_c, m, p, solver point)."""
    base = fan_baseline(params, cross_check=False)
    prob = constraint_attack_nlp(params, mode)
    x0 = np.concatenate([np.zeros(3), base.action])
    pt = solve_nlp(prob, x0, tol=1e-6, n_starts=n_starts)
    return pt.x[0:3].copy(), float(pt.x[3]), float(pt.x[4]), pt


@dataclass
class ConstraintRecovery:
    c_tilde: Array
    d_c_anticipated: Array
    m_hat: float
    p_hat: float
    sigma: float
    rho: float


def anticipate_powermax_attack(theta: Array, c_hat: Array, delta: float,
                               adjust_radius: bool = True) -> ConstraintRecovery:
    """Closed-form reverse-engineering of a cost-maximizing constraint attack.

    Solves the observed-envelope system once, recovers the attacker duals
    from the 2x2 linear system, and maps them to the anticipated
    perturbations. Everything depends only on observed quantities.

    `adjust_radius=False` drops the anticipated radius shift from the
    believed envelope (the cost-max double-bluff results published for this
    system behave this way; see the module's result tables).
    """
    theta = np.asarray(theta, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    m_hat, p_hat = solve_envelope_system(theta, c_hat)
    M = np.array([
        [2 * (p_hat - c_hat[1]) * theta[1] - theta[2], m_hat - c_hat[0]],
        [theta[0] + 2 * theta[1] * m_hat, p_hat - c_hat[1]],
    ])
    rhs = np.array([theta[0] + 2 * theta[1] * m_hat, theta[2]])
    det = float(np.linalg.det(M))
    if abs(det) < 1e-12:
        raise SingularDualSystem(f"dual system determinant {det:.3e}")
    sigma, rho = np.linalg.solve(M, rhs)
    k = rho * (m_hat - c_hat[0]) - sigma * theta[2]
    tau = np.sqrt(2.0 * delta / (theta[2] ** 2 + k * k + rho * rho * c_hat[2] ** 2))
    d_c = np.array([tau * k, tau * theta[2], -tau * rho * c_hat[2]])
    c_tilde = np.array([c_hat[0] - d_c[0], c_hat[1] - d_c[1],
                        c_hat[2] + (d_c[2] if adjust_radius else 0.0)])
    return ConstraintRecovery(c_tilde, d_c, m_hat, p_hat, float(sigma), float(rho))


def anticipate_break_attack(theta: Array, c_hat: Array, delta: float) -> ConstraintRecovery:
    """Reverse-engineering of a break-system attack.

    The attacker duals solve the same 2x2 system as in the cost-max case but
    with the break objective's gradient (evaluated at the believed-true
    center) on the right-hand side, so the recovery maps involve the
    believed-true parameters themselves. Three equations in c_tilde are
    solved by Newton (uniqueness is not guaranteed in general; the iteration
    starts at the observed values).
    """
    theta = np.asarray(theta, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    mh, ph = solve_envelope_system(theta, c_hat)
    ep = ph - c_hat[1]
    em = mh - c_hat[0]
    t12 = theta[0] + 2 * theta[1] * mh
    M = np.array([[2 * theta[1] * ep - theta[2], em], [t12, ep]])
    det = float(np.linalg.det(M))
    if abs(det) < 1e-12:
        raise SingularDualSystem(f"dual system determinant {det:.3e}")
    Minv = np.linalg.inv(M)
    cr_hat = c_hat[2]

    # (sigma, rho) are linear in the believed-true center
    dsig = Minv[0] @ np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    drho = Minv[1] @ np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])

    def sig_rho(v: Array) -> tuple[float, float]:
        s, r = Minv @ np.array([mh - v[0], ph - v[1]])
        return float(s), float(r)

    def parts(v: Array):
        sigma, rho = sig_rho(v)
        k = rho * em - sigma * theta[2]
        b = sigma * t12 + rho * ep
        W = k * k + b * b + rho * rho * cr_hat * cr_hat
        tau = np.sqrt(2.0 * delta / W)
        return sigma, rho, k, b, W, tau

    def fun(v: Array) -> Array:
        _sigma, rho, k, b, _W, tau = parts(v)
        return np.array([
            v[0] + tau * k - c_hat[0],
            v[1] + tau * b - c_hat[1],
            v[2] + tau * rho * cr_hat - c_hat[2],
        ])

    def jac(v: Array) -> Array:
        _sigma, rho, k, b, W, tau = parts(v)
        dk = em * drho - theta[2] * dsig
        db = t12 * dsig + ep * drho
        dW = 2 * k * dk + 2 * b * db + 2 * rho * cr_hat * cr_hat * drho
        dtau = -0.5 * tau * dW / W
        J = np.eye(3)
        J[0] += tau * dk + k * dtau
        J[1] += tau * db + b * dtau
        J[2] += cr_hat * (rho * dtau + tau * drho)
        return J

    v = newton(fun, jac, c_hat.copy())
    sigma, rho = sig_rho(v)
    d_c = np.array([c_hat[0] - v[0], c_hat[1] - v[1], v[2] - c_hat[2]])
    return ConstraintRecovery(v, d_c, mh, ph, sigma, rho)


def _defender_act(theta: Array, c_eff: Array) -> tuple[float, float]:
    return solve_envelope_system(theta, c_eff)


def _constraint_outcome(params: FanParams, d_c: Array, m: float, p: float,
                        diagnostics: dict | None = None) -> AttackOutcome:
    theta, c = params.theta_arr, params.c_arr
    g_true = envelope(m, p, c)
    cost = power(m, p, theta)
    return AttackOutcome(
        perturbation={"d_c": np.asarray(d_c, dtype=float)},
        defender_action=np.array([m, p]),
        true_cost=cost,
        perceived_cost=cost,          # constraint attacks leave the objective intact
        violation=max(0.0, g_true),
        weighted_violation=g_true,
        envelope_deviation=abs(g_true),
        solver_diagnostics=dict(diagnostics or {}),
    )


def powermax_double_bluff_nlp(params: FanParams, adjust_radius: bool,
                              freeze_radius: bool = False) -> NlpProblem:
    """Trilevel cost-max constraint attack as one stacked NLP.

    Variables: [d_m, d_p, d_r, m_hat, p_hat, sigma, rho, m, p]. The 2x2 dual
    system rows appear as equalities; the believed envelope of the final
    defender uses the anticipated center shift (and optionally the radius
    shift). `freeze_radius` pins the attacker's radius perturbation at zero,
    excluding that channel from the bluff.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max
    th3 = theta[2]

    def split(x: Array):
        return x[0:3], x[3], x[4], x[5], x[6], x[7], x[8]

    def believed(x: Array) -> tuple[Array, Array]:
        """(c_bar_m, c_bar_p, r_bar) and its 3x9 Jacobian."""
        d, mh, ph, sg, rh, _m, _p = split(x)
        ch = _c_hat(c, d)
        k = rh * (mh - ch[0]) - sg * th3
        W = th3 * th3 + k * k + rh * rh * ch[2] ** 2
        tau = np.sqrt(2.0 * delta / W)

        dk = np.zeros(9)
        dk[0] = -rh
        dk[3] = rh
        dk[5] = -th3
        dk[6] = mh - ch[0]
        dch_r = np.zeros(9)
        dch_r[2] = -1.0
        dW = 2 * k * dk + 2 * rh * ch[2] ** 2 * _unit(9, 6) + 2 * rh * rh * ch[2] * dch_r
        dtau = -0.5 * tau * dW / W

        cbm = ch[0] - tau * k
        cbp = ch[1] - tau * th3
        dcbm = _unit(9, 0) - (k * dtau + tau * dk)
        dcbp = _unit(9, 1) - th3 * dtau
        if adjust_radius:
            rb = ch[2] * (1.0 - tau * rh)
            drb = dch_r * (1.0 - tau * rh) - ch[2] * (rh * dtau + tau * _unit(9, 6))
        else:
            rb = ch[2]
            drb = dch_r
        return np.array([cbm, cbp, rb]), np.vstack([dcbm, dcbp, drb])

    def obj(x: Array) -> float:
        _, _, _, _, _, m, p = split(x)
        return -power(m, p, theta)

    def grad(x: Array) -> Array:
        _, _, _, _, _, m, p = split(x)
        g = np.zeros(9)
        g[7] = -(theta[0] + 2 * theta[1] * m)
        g[8] = -th3
        return g

    def eqs(x: Array) -> Array:
        d, mh, ph, sg, rh, m, p = split(x)
        ch = _c_hat(c, d)
        cb, _ = believed(x)
        return np.array([
            (ph - ch[1]) * (theta[0] + 2 * theta[1] * mh) - (mh - ch[0]) * th3,
            envelope(mh, ph, ch),
            (2 * (ph - ch[1]) * theta[1] - th3) * sg + (mh - ch[0]) * rh
            - (theta[0] + 2 * theta[1] * mh),
            (theta[0] + 2 * theta[1] * mh) * sg + (ph - ch[1]) * rh - th3,
            (p - cb[1]) * (theta[0] + 2 * theta[1] * m) - (m - cb[0]) * th3,
            0.5 * ((m - cb[0]) ** 2 + (p - cb[1]) ** 2 - cb[2] ** 2),
        ])

    def eqs_jac(x: Array) -> Array:
        d, mh, ph, sg, rh, m, p = split(x)
        ch = _c_hat(c, d)
        cb, dcb = believed(x)
        t12h = theta[0] + 2 * theta[1] * mh
        t12 = theta[0] + 2 * theta[1] * m
        J = np.zeros((6, 9))
        J[0, 0] = th3
        J[0, 1] = -t12h
        J[0, 3] = 2 * theta[1] * (ph - ch[1]) - th3
        J[0, 4] = t12h
        J[1, 0] = -(mh - ch[0])
        J[1, 1] = -(ph - ch[1])
        J[1, 2] = ch[2]
        J[1, 3] = mh - ch[0]
        J[1, 4] = ph - ch[1]
        J[2, 0] = -rh
        J[2, 1] = -2 * theta[1] * sg
        J[2, 3] = rh - 2 * theta[1]
        J[2, 4] = 2 * theta[1] * sg
        J[2, 5] = 2 * (ph - ch[1]) * theta[1] - th3
        J[2, 6] = mh - ch[0]
        J[3, 1] = -rh
        J[3, 3] = 2 * theta[1] * sg
        J[3, 4] = rh
        J[3, 5] = t12h
        J[3, 6] = ph - ch[1]
        # final defender system through the believed envelope
        J[4] = -t12 * dcb[1] + th3 * dcb[0]
        J[4, 7] += 2 * theta[1] * (p - cb[1]) - th3
        J[4, 8] += t12
        J[5] = -(m - cb[0]) * dcb[0] - (p - cb[1]) * dcb[1] - cb[2] * dcb[2]
        J[5, 7] += m - cb[0]
        J[5, 8] += p - cb[1]
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, 9))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    lower = upper = None
    if freeze_radius:
        lower = np.full(9, -np.inf)
        upper = np.full(9, np.inf)
        lower[2] = upper[2] = 0.0

    return NlpProblem(
        9, obj, grad,
        eq_constraints=(Block(eqs, eqs_jac, 6, "stacked_system"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        lower=lower, upper=upper,
        name="fan_powermax_double_bluff")


def _unit(n: int, i: int) -> Array:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def break_double_bluff_nlp(params: FanParams) -> NlpProblem:
    """Trilevel break-system attack as one stacked NLP.

    Variables: [d_m, d_p, d_r, m_hat, p_hat, sigma, rho, t_m, t_p, t_r, m, p]
    where (t_m, t_p, t_r) are the defender's believed-true envelope
    parameters recovered through the three-equation inversion.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max
    th3 = theta[2]
    n = 12

    def split(x: Array):
        return x[0:3], x[3], x[4], x[5], x[6], x[7:10], x[10], x[11]

    def obj(x: Array) -> float:
        _, _, _, _, _, _, m, p = split(x)
        return -envelope(m, p, c)

    def grad(x: Array) -> Array:
        _, _, _, _, _, _, m, p = split(x)
        g = np.zeros(n)
        g[10] = -(m - c[0])
        g[11] = -(p - c[1])
        return g

    def eqs(x: Array) -> Array:
        d, mh, ph, sg, rh, t, m, p = split(x)
        ch = _c_hat(c, d)
        t12h = theta[0] + 2 * theta[1] * mh
        ep = ph - ch[1]
        em = mh - ch[0]
        k = rh * em - sg * th3
        b = sg * t12h + rh * ep
        W = max(k * k + b * b + rh * rh * ch[2] ** 2, 1e-9)
        tau = np.sqrt(2.0 * delta / W)
        return np.array([
            ep * t12h - em * th3,
            envelope(mh, ph, ch),
            (2 * theta[1] * ep - th3) * sg + em * rh - (mh - t[0]),
            t12h * sg + ep * rh - (ph - t[1]),
            t[0] + tau * k - ch[0],
            t[1] + tau * b - ch[1],
            t[2] + tau * rh * ch[2] - ch[2],
            (p - t[1]) * (theta[0] + 2 * theta[1] * m) - (m - t[0]) * th3,
            0.5 * ((m - t[0]) ** 2 + (p - t[1]) ** 2 - t[2] ** 2),
        ])

    def eqs_jac(x: Array) -> Array:
        d, mh, ph, sg, rh, t, m, p = split(x)
        ch = _c_hat(c, d)
        i_dm, i_dp, i_dr, i_mh, i_ph, i_sg, i_rh = 0, 1, 2, 3, 4, 5, 6
        i_tm, i_tp, i_tr, i_m, i_p = 7, 8, 9, 10, 11
        t12h = theta[0] + 2 * theta[1] * mh
        t12 = theta[0] + 2 * theta[1] * m
        ep = ph - ch[1]
        em = mh - ch[0]

        dch = np.zeros((3, n))
        dch[0, i_dm] = 1.0
        dch[1, i_dp] = 1.0
        dch[2, i_dr] = -1.0
        dep = _unit(n, i_ph) - dch[1]
        dem = _unit(n, i_mh) - dch[0]

        k = rh * em - sg * th3
        b = sg * t12h + rh * ep
        dk = em * _unit(n, i_rh) + rh * dem - th3 * _unit(n, i_sg)
        db = (t12h * _unit(n, i_sg) + 2 * theta[1] * sg * _unit(n, i_mh)
              + ep * _unit(n, i_rh) + rh * dep)

        W_raw = k * k + b * b + rh * rh * ch[2] ** 2
        W = max(W_raw, 1e-9)
        dW = 2 * k * dk + 2 * b * db + 2 * rh * ch[2] ** 2 * _unit(n, i_rh) \
            + 2 * rh * rh * ch[2] * dch[2]
        tau = np.sqrt(2.0 * delta / W)
        dtau = -0.5 * tau * dW / W if W_raw >= 1e-9 else np.zeros(n)

        J = np.zeros((9, n))
        J[0] = t12h * dep + 2 * theta[1] * ep * _unit(n, i_mh) - th3 * dem
        J[1] = em * dem + ep * dep - ch[2] * dch[2]

        # eq3: (2 th2 ep - th3) sg + em rh - (mh - tm)
        J[2] = 2 * theta[1] * sg * dep + rh * dem
        J[2, i_sg] += 2 * theta[1] * ep - th3
        J[2, i_rh] += em
        J[2, i_mh] += -1.0
        J[2, i_tm] += 1.0

        # eq4: t12h sg + ep rh - (ph - tp)
        J[3] = rh * dep
        J[3, i_sg] += t12h
        J[3, i_mh] += 2 * theta[1] * sg
        J[3, i_rh] += ep
        J[3, i_ph] += -1.0
        J[3, i_tp] += 1.0

        # eq5..7: recovery maps
        J[4] = tau * dk + k * dtau - dch[0]
        J[4, i_tm] += 1.0
        J[5] = tau * db + b * dtau - dch[1]
        J[5, i_tp] += 1.0
        J[6] = ch[2] * (rh * dtau + tau * _unit(n, i_rh)) + (tau * rh - 1.0) * dch[2]
        J[6, i_tr] += 1.0

        # eq8..9: final defender at believed-true parameters
        J[7, i_tp] = -t12
        J[7, i_tm] = th3
        J[7, i_m] = 2 * theta[1] * (p - t[1]) - th3
        J[7, i_p] = t12
        J[8, i_tm] = -(m - t[0])
        J[8, i_tp] = -(p - t[1])
        J[8, i_tr] = -t[2]
        J[8, i_m] = m - t[0]
        J[8, i_p] = p - t[1]
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, n))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    return NlpProblem(
        n, obj, grad,
        eq_constraints=(Block(eqs, eqs_jac, 9, "stacked_system"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        name="fan_break_double_bluff")


def fan_constraint_attack(params: FanParams, mode: str, awareness: str,
                          adjust_radius_in_double_bluff: bool = False,
                          n_starts: int = 8) -> AttackOutcome:
    """Constraint-parameter attack in one of two modes and three awareness
    levels.

    unaware: bilevel attack against a normally-playing defender.
    aware: the attacker plays its unaware-optimal perturbation, but the
    defender reverse-engineers the believed-true envelope before acting.
    double_bluff: the attacker optimizes against that aware defender.

    The cost-max double-bluff defaults to the center-only anticipated
    envelope (`adjust_radius_in_double_bluff=False`), which is what this
    system's published double-bluff results correspond to; pass True for the
    variant that also shifts the believed radius.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max
    if mode not in ("powermax", "break"):
        raise ValueError(f"unknown constraint attack mode {mode!r}")
    if delta == 0.0:
        base = fan_baseline(params)
        return _constraint_outcome(params, np.zeros(3), base.m, base.p)

    if awareness == "unaware":
        d_c, m, p, pt = solve_constraint_attack_unaware(params, mode, n_starts)
        return _constraint_outcome(params, d_c, m, p,
                                   {"attacker_nlp": pt.residuals()})
    if awareness == "aware":
        d_c, _m, _p, pt = solve_constraint_attack_unaware(params, mode, n_starts)
        c_hat = _c_hat(c, d_c)
        if mode == "powermax":
            rec = anticipate_powermax_attack(theta, c_hat, delta)
        else:
            rec = anticipate_break_attack(theta, c_hat, delta)
        m, p = _defender_act(theta, rec.c_tilde)
        return _constraint_outcome(params, d_c, m, p,
                                   {"attacker_nlp": pt.residuals()})
    if awareness == "double_bluff":
        base = fan_baseline(params, cross_check=False)
        if mode == "powermax":
            prob = powermax_double_bluff_nlp(
                params, adjust_radius=adjust_radius_in_double_bluff,
                freeze_radius=not adjust_radius_in_double_bluff)
            rho0 = theta[2] / (base.p - c[1])
            x0 = np.concatenate([np.zeros(3), base.action, [0.0, rho0], base.action])
        else:
            prob = break_double_bluff_nlp(params)
            x0 = np.concatenate([np.zeros(3), base.action, [0.0, 1.0],
                                 c, base.action])
        pt = solve_nlp(prob, x0, tol=1e-6, n_starts=n_starts)
        d_c = pt.x[0:3].copy()
        # refine the defender response through the exact recovery chain
        c_hat = _c_hat(c, d_c)
        if mode == "powermax":
            rec = anticipate_powermax_attack(
                theta, c_hat, delta,
                adjust_radius=adjust_radius_in_double_bluff)
        else:
            rec = anticipate_break_attack(theta, c_hat, delta)
        m, p = _defender_act(theta, rec.c_tilde)
        return _constraint_outcome(params, d_c, m, p,
                                   {"stacked_nlp": pt.residuals()})
    raise ValueError(f"unknown awareness level {awareness!r}")


def fan_cross_case(params: FanParams, attacker_action: str,
                   defender_belief: str, n_starts: int = 8) -> AttackOutcome:
    """Compose an attacker move (computed against a normal defender) with a
    possibly mistaken defender belief, then evaluate on the true parameters.
    """
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max
    diagnostics: dict[str, tuple[float, float, float]] = {}
    if attacker_action == "none":
        d_c = np.zeros(3)
    elif attacker_action in ("powermax", "break"):
        d_c, _m, _p, pt = solve_constraint_attack_unaware(params, attacker_action, n_starts)
        diagnostics["attacker_nlp"] = pt.residuals()
    else:
        raise ValueError(f"unknown attacker action {attacker_action!r}")
    c_hat = _c_hat(c, d_c)
    if defender_belief == "normal":
        c_eff = c_hat
    elif defender_belief == "powermax":
        c_eff = anticipate_powermax_attack(theta, c_hat, delta).c_tilde
    elif defender_belief == "break":
        c_eff = anticipate_break_attack(theta, c_hat, delta).c_tilde
    else:
        raise ValueError(f"unknown defender belief {defender_belief!r}")
    m, p = _defender_act(theta, c_eff)
    return _constraint_outcome(params, d_c, m, p, diagnostics)


# ---------------------------------------------------------------------------
# generic complementarity formulations (cross-validation against solve_mpec)
# ---------------------------------------------------------------------------

def perception_attack_mpec(params: FanParams) -> NlpProblem:
    """Perception attack with the defender KKT system kept in
    complementarity form. Variables: [d1, d2, d3, m, p, lam]."""
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_theta_max

    def obj(x: Array) -> float:
        return -power(x[3], x[4], theta)

    def grad(x: Array) -> Array:
        g = np.zeros(6)
        g[3] = -(theta[0] + 2 * theta[1] * x[3])
        g[4] = -theta[2]
        return g

    def stat(x: Array) -> Array:
        d, m, p, lam = x[0:3], x[3], x[4], x[5]
        th = theta + d
        return np.array([
            th[0] + 2 * th[1] * m + lam * (m - c[0]),
            th[2] + lam * (p - c[1]),
        ])

    def stat_jac(x: Array) -> Array:
        d, m, p, lam = x[0:3], x[3], x[4], x[5]
        th = theta + d
        J = np.zeros((2, 6))
        J[0, 0] = 1.0
        J[0, 1] = 2 * m
        J[0, 3] = 2 * th[1] + lam
        J[0, 5] = m - c[0]
        J[1, 2] = 1.0
        J[1, 4] = lam
        J[1, 5] = p - c[1]
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, 6))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    def nonneg(x: Array) -> Array:
        return np.array([x[5], -envelope(x[3], x[4], c)])

    def nonneg_jac(x: Array) -> Array:
        J = np.zeros((2, 6))
        J[0, 5] = 1.0
        J[1, 3] = -(x[3] - c[0])
        J[1, 4] = -(x[4] - c[1])
        return J

    return NlpProblem(
        6, obj, grad,
        eq_constraints=(Block(stat, stat_jac, 2, "defender_stationarity"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        nonneg_exprs=(Block(nonneg, nonneg_jac, 2, "lam_and_slack"),),
        comp_pairs=((0, 1),),
        name="fan_perception_mpec")


def powermax_attack_mpec(params: FanParams) -> NlpProblem:
    """Cost-max constraint attack in complementarity form.
    Variables: [d_m, d_p, d_r, m, p, lam]."""
    theta, c = params.theta_arr, params.c_arr
    delta = params.delta_c_max

    def obj(x: Array) -> float:
        return -power(x[3], x[4], theta)

    def grad(x: Array) -> Array:
        g = np.zeros(6)
        g[3] = -(theta[0] + 2 * theta[1] * x[3])
        g[4] = -theta[2]
        return g

    def stat(x: Array) -> Array:
        d, m, p, lam = x[0:3], x[3], x[4], x[5]
        ch = _c_hat(c, d)
        return np.array([
            theta[0] + 2 * theta[1] * m + lam * (m - ch[0]),
            theta[2] + lam * (p - ch[1]),
        ])

    def stat_jac(x: Array) -> Array:
        d, m, p, lam = x[0:3], x[3], x[4], x[5]
        ch = _c_hat(c, d)
        J = np.zeros((2, 6))
        J[0, 0] = -lam
        J[0, 3] = 2 * theta[1] + lam
        J[0, 5] = m - ch[0]
        J[1, 1] = -lam
        J[1, 4] = lam
        J[1, 5] = p - ch[1]
        return J

    def budget(x: Array) -> Array:
        d = x[0:3]
        return np.array([100.0 * (0.5 * float(d @ d) - delta)])

    def budget_jac(x: Array) -> Array:
        J = np.zeros((1, 6))
        J[0, 0:3] = 100.0 * x[0:3]
        return J

    def nonneg(x: Array) -> Array:
        d = x[0:3]
        return np.array([x[5], -envelope(x[3], x[4], _c_hat(c, d))])

    def nonneg_jac(x: Array) -> Array:
        d, m, p = x[0:3], x[3], x[4]
        ch = _c_hat(c, d)
        J = np.zeros((2, 6))
        J[0, 5] = 1.0
        J[1, 0] = m - ch[0]
        J[1, 1] = p - ch[1]
        J[1, 2] = -ch[2]
        J[1, 3] = -(m - ch[0])
        J[1, 4] = -(p - ch[1])
        return J

    return NlpProblem(
        6, obj, grad,
        eq_constraints=(Block(stat, stat_jac, 2, "defender_stationarity"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        nonneg_exprs=(Block(nonneg, nonneg_jac, 2, "lam_and_slack"),),
        comp_pairs=((0, 1),),
        name="fan_powermax_mpec")


def theta_linear_model(params: FanParams):
    """The fan problem in coefficient-linear form for robustness analysis."""
    from .robustness import FunPiece, ThetaLinearModel

    c = params.c_arr

    def solve(theta: Array, x0: Array | None = None) -> KktPoint:
        theta = np.asarray(theta, dtype=float)
        m, p = solve_envelope_system(theta, c, x0)
        return fan_kkt_point(theta, c, m, p)

    terms = (
        FunPiece(lambda x: x[0], lambda x: np.array([1.0, 0.0]),
                 lambda x: np.zeros((2, 2))),
        FunPiece(lambda x: x[0] ** 2, lambda x: np.array([2.0 * x[0], 0.0]),
                 lambda x: np.array([[2.0, 0.0], [0.0, 0.0]])),
        FunPiece(lambda x: x[1], lambda x: np.array([0.0, 1.0]),
                 lambda x: np.zeros((2, 2))),
    )
    constraints = (
        FunPiece(lambda x: envelope(x[0], x[1], c),
                 lambda x: np.array([x[0] - c[0], x[1] - c[1]]),
                 lambda x: np.eye(2)),
    )
    return ThetaLinearModel(theta=params.theta_arr, objective_terms=terms,
                            constraints=constraints, solve=solve)


def bundled_problems(params: FanParams | None = None) -> dict[str, NlpProblem]:
    """Every fan NLP with hand-coded derivatives, for gradient checking."""
    params = params or FanParams()
    return {
        "baseline": fan_nlp(params.theta_arr, params.c_arr),
        "theta_double_bluff": theta_double_bluff_nlp(params),
        "powermax_unaware": constraint_attack_nlp(params, "powermax"),
        "break_unaware": constraint_attack_nlp(params, "break"),
        "powermax_double_bluff": powermax_double_bluff_nlp(params, adjust_radius=True),
        "powermax_double_bluff_center": powermax_double_bluff_nlp(params, adjust_radius=False),
        "break_double_bluff": break_double_bluff_nlp(params),
        "perception_mpec": perception_attack_mpec(params),
        "powermax_mpec": powermax_attack_mpec(params),
    }
