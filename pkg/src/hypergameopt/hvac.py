"""Single-zone HVAC model-predictive control and its perception attacks.

The controller picks, per step, a mass flow m, an outside-air fraction d, a
chiller output temperature T_s and a zone supply temperature T_sn; the duct
temperature T_i and zone temperature T_n follow from the physics. Power is
fan + central heater + zonal heater + chiller, and the zone must return to
its initial temperature at the end of the horizon.

Attacks perturb what the controller believes: the thermal coupling
coefficients (static attack, relative budget) or the outside-temperature
series (dynamic attack, absolute budget). The attacked controller's
optimality conditions, in complementarity form, become constraints of the
attacker's program, which is solved by sequential relaxation; true
consequences are evaluated by forward simulation of the unperturbed physics
under the controller's chosen inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MissingDuals
from .hypergame import AttackOutcome
from .nlp import Block, KktPoint, NlpProblem, RelaxationSchedule, solve_mpec, solve_nlp

Array = np.ndarray


@dataclass(frozen=True)
class HvacParams:
    theta1: float = 0.1
    theta2: float = 0.1
    nu_h: float = 0.99
    nu_n: float = 0.99
    nu_c: float = 0.99
    c_p: float = 1.0
    t_outside: float = 25.0
    beta: float = 0.0045
    gamma: float = 8.4e-5
    q_load: float = 0.0
    horizon: int = 5
    d_lower: float = 0.2
    d_upper: float = 0.5
    m_lower: float = 3.93
    m_upper: float = 13.1
    t_zone_lower: float = 21.1
    t_zone_upper: float = 23.9
    t_supply_lower: float = 12.7
    t_supply_upper: float = 35.0
    t_chiller_floor: float = 5.0
    t_zone_initial: float = 23.71
    delta_max: float = 0.1
    delta_t_max: float | None = None

    def __post_init__(self) -> None:
        for lo, hi, name in ((self.d_lower, self.d_upper, "d"),
                             (self.m_lower, self.m_upper, "m"),
                             (self.t_zone_lower, self.t_zone_upper, "t_zone"),
                             (self.t_supply_lower, self.t_supply_upper, "t_supply")):
            if lo >= hi:
                raise ValueError(f"{name} bounds are not ordered")
        for nu in (self.nu_h, self.nu_n, self.nu_c):
            if not (0.0 < nu <= 1.0):
                raise ValueError("efficiencies must lie in (0, 1]")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if not (self.t_zone_lower <= self.t_zone_initial <= self.t_zone_upper):
            raise ValueError("initial zone temperature outside its bounds")
        if self.delta_max < 0:
            raise ValueError("delta_max must be nonnegative")

    @property
    def t0_series(self) -> Array:
        return np.full(self.horizon, self.t_outside)

    @property
    def q_series(self) -> Array:
        return np.full(self.horizon, self.q_load)

    @property
    def dynamic_budget(self) -> float:
        return 0.1 * self.horizon if self.delta_t_max is None else self.delta_t_max


@dataclass
class Controls:
    m: Array
    d: Array
    t_s: Array
    t_sn: Array


@dataclass
class HvacTrajectory:
    controls: Controls
    t_n_perceived: Array
    t_i_perceived: Array
    t_n_true: Array
    t_i_true: Array
    power_fan: Array
    power_heater: Array
    power_zonal: Array
    power_chiller: Array
    total_power: float
    perceived_power: float
    duals: dict[str, Array] = field(default_factory=dict)
    diagnostics: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    @property
    def per_step_power(self) -> Array:
        return self.power_fan + self.power_heater + self.power_zonal + self.power_chiller

    @property
    def delta_t_zone(self) -> Array:
        """True minus perceived zone temperature per step."""
        return self.t_n_true - self.t_n_perceived


def lambda_mean(trajectory: HvacTrajectory) -> float:
    """Average multiplier on the perceived thermal-evolution equalities."""
    lam = trajectory.duals.get("lambda")
    if lam is None:
        raise MissingDuals("trajectory carries no thermal-evolution multipliers")
    return float(np.mean(lam))


def true_power_series(params: HvacParams, controls: Controls,
                      t_n: Array, t_i: Array,
                      t0: Array | None = None) -> tuple[Array, Array, Array, Array]:
    """Fan/heater/zonal/chiller power at the given states and true outside
    temperature (pass t0 to price against a different series)."""
    t0 = params.t0_series if t0 is None else t0
    m, d, t_s, t_sn = controls.m, controls.d, controls.t_s, controls.t_sn
    cp = params.c_p
    fan = params.theta1 * m + params.theta2 * m * m
    heater = params.nu_h * cp * m * (t_i - d * t0 - (1.0 - d) * t_n)
    zonal = params.nu_n * cp * m * (t_sn - t_s)
    chiller = params.nu_c * cp * m * (t_i - t_s)
    return fan, heater, zonal, chiller


def simulate_true_states(params: HvacParams, controls: Controls) -> tuple[Array, Array]:
    """Forward recursion of the unperturbed physics under given inputs.

    The zone temperature follows the implicit thermal step; the duct
    temperature is whichever of the chiller output and the mixed return air
    satisfies both one-sided constraints, i.e. their maximum.
    """
    tau = params.horizon
    t0 = params.t0_series
    q = params.q_series
    t_n = np.empty(tau)
    t_i = np.empty(tau)
    prev = params.t_zone_initial
    for t in range(tau):
        bm = params.beta * controls.m[t]
        t_n[t] = ((1.0 - params.gamma) * prev + bm * controls.t_sn[t]
                  + params.gamma * t0[t] + q[t]) / (1.0 + bm)
        mix = controls.d[t] * t0[t] + (1.0 - controls.d[t]) * t_n[t]
        t_i[t] = max(controls.t_s[t], mix)
        prev = t_n[t]
    return t_n, t_i


def simulate_true_trajectory(params: HvacParams, controls: Controls,
                             t_n_perceived: Array | None = None,
                             t_i_perceived: Array | None = None,
                             duals: dict[str, Array] | None = None) -> HvacTrajectory:
    """True states, per-component power, and the true-minus-perceived gap."""
    t_n, t_i = simulate_true_states(params, controls)
    if t_n_perceived is None:
        t_n_perceived = t_n.copy()
    if t_i_perceived is None:
        t_i_perceived = t_i.copy()
    fan, heater, zonal, chiller = true_power_series(params, controls, t_n, t_i)
    perceived = perceived_power(params, controls, t_n_perceived, t_i_perceived)
    return HvacTrajectory(
        controls=controls,
        t_n_perceived=np.asarray(t_n_perceived, dtype=float),
        t_i_perceived=np.asarray(t_i_perceived, dtype=float),
        t_n_true=t_n, t_i_true=t_i,
        power_fan=fan, power_heater=heater, power_zonal=zonal,
        power_chiller=chiller,
        total_power=float(np.sum(fan + heater + zonal + chiller)),
        perceived_power=perceived,
        duals=dict(duals or {}),
    )


def perceived_power(params: HvacParams, controls: Controls, t_n_hat: Array,
                    t_i_hat: Array, t0_hat: Array | None = None) -> float:
    t0_hat = params.t0_series if t0_hat is None else t0_hat
    fan, heater, zonal, chiller = true_power_series(
        params, controls, t_n_hat, t_i_hat, t0=t0_hat)
    return float(np.sum(fan + heater + zonal + chiller))


# ---------------------------------------------------------------------------
# baseline optimal control problem
# ---------------------------------------------------------------------------

class _Layout:
    """Offsets of the named variable families inside the flat vector."""

    def __init__(self, tau: int, families: list[str], extras: list[str]):
        self.tau = tau
        self.off: dict[str, int] = {}
        pos = 0
        for name in families:
            self.off[name] = pos
            pos += tau
        for name in extras:
            self.off[name] = pos
            pos += 1
        self.n = pos

    def get(self, x: Array, name: str) -> Array:
        o = self.off[name]
        return x[o:o + self.tau]

    def scalar(self, x: Array, name: str) -> float:
        return float(x[self.off[name]])

    def rows(self, name: str) -> np.ndarray:
        o = self.off[name]
        return np.arange(o, o + self.tau)


def _baseline_layout(params: HvacParams) -> _Layout:
    return _Layout(params.horizon, ["m", "d", "ts", "tsn", "tn", "ti"], [])


def baseline_problem(params: HvacParams,
                     t0_override: Array | None = None) -> tuple[NlpProblem, _Layout]:
    """The controller's own power-minimization NLP (no attacker).

    `t0_override` substitutes the outside-temperature series the controller
    plans against (used for its perceived problem under a dynamic attack).
    """
    lay = _baseline_layout(params)
    tau, n = params.horizon, lay.n
    t0 = params.t0_series if t0_override is None else np.asarray(t0_override, float)
    q = params.q_series
    cp = params.c_p
    beta, gamma = params.beta, params.gamma
    t_init = params.t_zone_initial

    def parts(x: Array):
        return (lay.get(x, "m"), lay.get(x, "d"), lay.get(x, "ts"),
                lay.get(x, "tsn"), lay.get(x, "tn"), lay.get(x, "ti"))

    def obj(x: Array) -> float:
        m, d, ts, tsn, tn, ti = parts(x)
        fan = params.theta1 * m + params.theta2 * m * m
        heater = params.nu_h * cp * m * (ti - d * t0 - (1.0 - d) * tn)
        zonal = params.nu_n * cp * m * (tsn - ts)
        chiller = params.nu_c * cp * m * (ti - ts)
        return float(np.sum(fan + heater + zonal + chiller))

    def grad(x: Array) -> Array:
        m, d, ts, tsn, tn, ti = parts(x)
        g = np.zeros(n)
        heater_slack = ti - d * t0 - (1.0 - d) * tn
        g[lay.rows("m")] = (params.theta1 + 2.0 * params.theta2 * m
                            + params.nu_h * cp * heater_slack
                            + params.nu_n * cp * (tsn - ts)
                            + params.nu_c * cp * (ti - ts))
        g[lay.rows("d")] = params.nu_h * cp * m * (tn - t0)
        g[lay.rows("ts")] = -(params.nu_n + params.nu_c) * cp * m
        g[lay.rows("tsn")] = params.nu_n * cp * m
        g[lay.rows("tn")] = -params.nu_h * cp * m * (1.0 - d)
        g[lay.rows("ti")] = (params.nu_h + params.nu_c) * cp * m
        return g

    def thermal(x: Array) -> Array:
        m, _d, _ts, tsn, tn, _ti = parts(x)
        prev = np.concatenate([[t_init], tn[:-1]])
        return (-tn + (1.0 - gamma) * prev + beta * m * (tsn - tn)
                + gamma * t0 + q)

    def thermal_jac(x: Array) -> Array:
        m, _d, _ts, tsn, tn, _ti = parts(x)
        J = np.zeros((tau, n))
        r = np.arange(tau)
        J[r, lay.off["tn"] + r] = -1.0 - beta * m
        J[r[1:], lay.off["tn"] + r[1:] - 1] = 1.0 - gamma
        J[r, lay.off["m"] + r] = beta * (tsn - tn)
        J[r, lay.off["tsn"] + r] = beta * m
        return J

    def endpoint(x: Array) -> Array:
        tn = lay.get(x, "tn")
        return np.array([tn[-1] - t_init])

    def endpoint_jac(x: Array) -> Array:
        J = np.zeros((1, n))
        J[0, lay.off["tn"] + tau - 1] = 1.0
        return J

    def slacks(x: Array) -> Array:
        m, d, ts, tsn, tn, ti = parts(x)
        return np.concatenate([
            -(ti - d * t0 - (1.0 - d) * tn),     # heater feed not below mix
            -(ti - ts),                          # chiller only cools
            -(tsn - ts),                         # zonal heater only heats
        ])

    def slacks_jac(x: Array) -> Array:
        m, d, ts, tsn, tn, ti = parts(x)
        J = np.zeros((3 * tau, n))
        r = np.arange(tau)
        J[r, lay.off["ti"] + r] = -1.0
        J[r, lay.off["d"] + r] = t0 - tn
        J[r, lay.off["tn"] + r] = 1.0 - d
        J[tau + r, lay.off["ti"] + r] = -1.0
        J[tau + r, lay.off["ts"] + r] = 1.0
        J[2 * tau + r, lay.off["tsn"] + r] = -1.0
        J[2 * tau + r, lay.off["ts"] + r] = 1.0
        return J

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[lay.rows("m")], upper[lay.rows("m")] = params.m_lower, params.m_upper
    lower[lay.rows("d")], upper[lay.rows("d")] = params.d_lower, params.d_upper
    lower[lay.rows("tsn")], upper[lay.rows("tsn")] = params.t_supply_lower, params.t_supply_upper
    lower[lay.rows("tn")], upper[lay.rows("tn")] = params.t_zone_lower, params.t_zone_upper
    lower[lay.rows("ts")], upper[lay.rows("ts")] = params.t_chiller_floor, 60.0
    lower[lay.rows("ti")], upper[lay.rows("ti")] = 0.0, 60.0

    prob = NlpProblem(
        n, obj, grad,
        eq_constraints=(Block(thermal, thermal_jac, tau, "thermal"),
                        Block(endpoint, endpoint_jac, 1, "endpoint")),
        ineq_constraints=(Block(slacks, slacks_jac, 3 * tau, "process_slacks"),),
        lower=lower, upper=upper, name=f"hvac_baseline_{tau}")
    return prob, lay


def _drift_start(params: HvacParams,
                 t0_override: Array | None = None) -> tuple[Controls, Array, Array]:
    """Feasible drift-then-chill schedule: supply mixed air untouched until
    the final step, then chill exactly back to the initial temperature."""
    tau = params.horizon
    t0 = params.t0_series if t0_override is None else np.asarray(t0_override, float)
    q = params.q_series
    m = np.full(tau, params.m_lower)
    d = np.full(tau, params.d_lower)
    tn = np.empty(tau)
    tsn = np.empty(tau)
    prev = params.t_zone_initial
    for t in range(tau):
        bm = params.beta * m[t]
        if t < tau - 1:
            tn[t] = ((1.0 - params.gamma) * prev + bm * d[t] * t0[t]
                     + params.gamma * t0[t] + q[t]) / (1.0 + bm * d[t])
            tsn[t] = d[t] * t0[t] + (1.0 - d[t]) * tn[t]
        else:
            tn[t] = params.t_zone_initial
            tsn[t] = (tn[t] * (1.0 + bm) - (1.0 - params.gamma) * prev
                      - params.gamma * t0[t] - q[t]) / bm
        prev = tn[t]
    ts = tsn.copy()
    ti = d * t0 + (1.0 - d) * tn
    ti = np.maximum(ti, ts)
    return Controls(m, d, ts, tsn), tn, ti


@dataclass
class _ControllerSolution:
    controls: Controls
    t_n: Array
    t_i: Array
    lam: Array
    mu_end: float
    residuals: tuple[float, float, float]


def _solve_controller(params: HvacParams, d_beta: float = 0.0,
                      d_gamma: float = 0.0, dt0: Array | None = None,
                      tol: float = 1e-6) -> _ControllerSolution:
    """Solve the controller's problem under its (possibly manipulated)
    beliefs; the returned states are the controller's own predictions."""
    believed = params if (d_beta == 0.0 and d_gamma == 0.0) else replace(
        params, beta=params.beta + d_beta, gamma=params.gamma + d_gamma)
    t0_hat = None if dt0 is None else params.t0_series + dt0
    prob, lay = baseline_problem(believed, t0_override=t0_hat)
    controls, tn, ti = _drift_start(believed, t0_override=t0_hat)
    x0 = np.zeros(lay.n)
    x0[lay.rows("m")] = controls.m
    x0[lay.rows("d")] = controls.d
    x0[lay.rows("ts")] = controls.t_s
    x0[lay.rows("tsn")] = controls.t_sn
    x0[lay.rows("tn")] = tn
    x0[lay.rows("ti")] = ti
    pt = solve_nlp(prob, x0, tol=tol, n_starts=1)
    sol = Controls(lay.get(pt.x, "m").copy(), lay.get(pt.x, "d").copy(),
                   lay.get(pt.x, "ts").copy(), lay.get(pt.x, "tsn").copy())
    return _ControllerSolution(
        controls=sol,
        t_n=lay.get(pt.x, "tn").copy(), t_i=lay.get(pt.x, "ti").copy(),
        lam=pt.lambda_eq[:params.horizon].copy(),
        mu_end=float(pt.lambda_eq[params.horizon]),
        residuals=pt.residuals())


def hvac_baseline(params: HvacParams, tol: float = 1e-6) -> HvacTrajectory:
    """Solve the unattacked optimal control problem."""
    cs = _solve_controller(params, tol=tol)
    traj = simulate_true_trajectory(
        params, cs.controls,
        t_n_perceived=cs.t_n, t_i_perceived=cs.t_i,
        duals={"lambda": cs.lam, "mu_endpoint": np.array([cs.mu_end])})
    traj.diagnostics["baseline_nlp"] = cs.residuals
    return traj


# ---------------------------------------------------------------------------
# attacker programs over the controller's optimality system
# ---------------------------------------------------------------------------

_DUAL_FAMILIES = ["lam", "smu", "sdu", "su", "ssnu", "sis"]


def _attack_layout(params: HvacParams, mode: str) -> _Layout:
    families = ["m", "d", "ts", "tsn", "tnh", "tih", "tn", "ti"] + _DUAL_FAMILIES
    if mode == "static":
        return _Layout(params.horizon, families, ["mu_end", "d_beta", "d_gamma"])
    lay = _Layout(params.horizon, families + ["dt0"], ["mu_end"])
    return lay


def attack_problem(params: HvacParams, mode: str) -> tuple[NlpProblem, _Layout]:
    """The attacker's program: maximize true power subject to the perturbed
    controller's complementarity-form optimality system, the true physics,
    and the attack budget. mode is "static" (thermal coefficients, relative
    budget) or "dynamic" (outside-temperature series, absolute budget).
    """
    if mode not in ("static", "dynamic"):
        raise ValueError(f"unknown attack mode {mode!r}")
    lay = _attack_layout(params, mode)
    tau, n = params.horizon, lay.n
    t0 = params.t0_series
    q = params.q_series
    cp = params.c_p
    beta, gamma = params.beta, params.gamma
    t_init = params.t_zone_initial
    nu_h, nu_n, nu_c = params.nu_h, params.nu_n, params.nu_c
    r = np.arange(tau)

    def split(x: Array):
        c = Controls(lay.get(x, "m"), lay.get(x, "d"), lay.get(x, "ts"),
                     lay.get(x, "tsn"))
        tnh, tih = lay.get(x, "tnh"), lay.get(x, "tih")
        tn, ti = lay.get(x, "tn"), lay.get(x, "ti")
        duals = {f: lay.get(x, f) for f in _DUAL_FAMILIES}
        mu_end = lay.scalar(x, "mu_end")
        if mode == "static":
            d_beta, d_gamma = lay.scalar(x, "d_beta"), lay.scalar(x, "d_gamma")
            dt0 = np.zeros(tau)
        else:
            d_beta = d_gamma = 0.0
            dt0 = lay.get(x, "dt0")
        return c, tnh, tih, tn, ti, duals, mu_end, d_beta, d_gamma, dt0

    # ---- attacker objective: true power, maximized -----------------------
    def obj(x: Array) -> float:
        c, _tnh, _tih, tn, ti, *_ = split(x)
        fan, heater, zonal, chiller = true_power_series(params, c, tn, ti)
        return -float(np.sum(fan + heater + zonal + chiller))

    def grad(x: Array) -> Array:
        c, _tnh, _tih, tn, ti, *_ = split(x)
        g = np.zeros(n)
        heater_slack = ti - c.d * t0 - (1.0 - c.d) * tn
        g[lay.rows("m")] = -(params.theta1 + 2.0 * params.theta2 * c.m
                             + nu_h * cp * heater_slack
                             + nu_n * cp * (c.t_sn - c.t_s)
                             + nu_c * cp * (ti - c.t_s))
        g[lay.rows("d")] = -nu_h * cp * c.m * (tn - t0)
        g[lay.rows("ts")] = (nu_n + nu_c) * cp * c.m
        g[lay.rows("tsn")] = -nu_n * cp * c.m
        g[lay.rows("tn")] = nu_h * cp * c.m * (1.0 - c.d)
        g[lay.rows("ti")] = -(nu_h + nu_c) * cp * c.m
        return g

    # ---- equalities: perceived thermal + endpoint, true thermal ----------
    def equalities(x: Array) -> Array:
        c, tnh, _tih, tn, _ti, _duals, _mu, d_beta, d_gamma, dt0 = split(x)
        beta_h, gamma_h = beta + d_beta, gamma + d_gamma
        t0_h = t0 + dt0
        prev_h = np.concatenate([[t_init], tnh[:-1]])
        perceived = (-tnh + (1.0 - gamma_h) * prev_h
                     + beta_h * c.m * (c.t_sn - tnh) + gamma_h * t0_h + q)
        prev = np.concatenate([[t_init], tn[:-1]])
        true = (-tn + (1.0 - gamma) * prev + beta * c.m * (c.t_sn - tn)
                + gamma * t0 + q)
        return np.concatenate([perceived, [tnh[-1] - t_init], true])

    def equalities_jac(x: Array) -> Array:
        c, tnh, _tih, tn, _ti, _duals, _mu, d_beta, d_gamma, dt0 = split(x)
        beta_h, gamma_h = beta + d_beta, gamma + d_gamma
        t0_h = t0 + dt0
        prev_h = np.concatenate([[t_init], tnh[:-1]])
        J = np.zeros((2 * tau + 1, n))
        # perceived thermal rows
        J[r, lay.off["tnh"] + r] = -1.0 - beta_h * c.m
        J[r[1:], lay.off["tnh"] + r[1:] - 1] = 1.0 - gamma_h
        J[r, lay.off["m"] + r] = beta_h * (c.t_sn - tnh)
        J[r, lay.off["tsn"] + r] = beta_h * c.m
        if mode == "static":
            J[r, lay.off["d_beta"]] = c.m * (c.t_sn - tnh)
            J[r, lay.off["d_gamma"]] = -prev_h + t0_h
        else:
            J[r, lay.off["dt0"] + r] = gamma_h
        # perceived endpoint
        J[tau, lay.off["tnh"] + tau - 1] = 1.0
        # true thermal rows
        rr = tau + 1 + r
        J[rr, lay.off["tn"] + r] = -1.0 - beta * c.m
        J[rr[1:], lay.off["tn"] + r[1:] - 1] = 1.0 - gamma
        J[rr, lay.off["m"] + r] = beta * (c.t_sn - tn)
        J[rr, lay.off["tsn"] + r] = beta * c.m
        return J

    # ---- budget -----------------------------------------------------------
    if mode == "static":
        def budget(x: Array) -> Array:
            db, dg = lay.scalar(x, "d_beta"), lay.scalar(x, "d_gamma")
            return np.array([100.0 * (0.5 * ((db / beta) ** 2 + (dg / gamma) ** 2)
                                      - params.delta_max)])

        def budget_jac(x: Array) -> Array:
            db, dg = lay.scalar(x, "d_beta"), lay.scalar(x, "d_gamma")
            J = np.zeros((1, n))
            J[0, lay.off["d_beta"]] = 100.0 * db / beta ** 2
            J[0, lay.off["d_gamma"]] = 100.0 * dg / gamma ** 2
            return J
    else:
        def budget(x: Array) -> Array:
            dt0 = lay.get(x, "dt0")
            return np.array([100.0 * (0.5 * float(dt0 @ dt0)
                                      - params.dynamic_budget)])

        def budget_jac(x: Array) -> Array:
            J = np.zeros((1, n))
            J[0, lay.rows("dt0")] = 100.0 * lay.get(x, "dt0")
            return J

    # ---- the controller's complementarity system + true duct pairing -----
    group_names = [
        "b_ml", "s_ml", "smu", "s_mu", "s_dl", "b_dl", "sdu", "s_du",
        "b_tl", "s_tl", "su", "s_tu", "b_snl", "s_snl", "ssnu", "s_snu",
        "b_in", "s_in", "b_is2", "s_is2", "sis", "s_is", "ti_cool", "ti_mix",
    ]
    g_off = {name: i * tau for i, name in enumerate(group_names)}
    n_nonneg = len(group_names) * tau
    _flat_cache: dict[tuple[str, str, int], tuple[Array, slice]] = {}

    def _flat_idx(group: str, family: str, shift: int) -> tuple[Array, slice]:
        key = (group, family, shift)
        hit = _flat_cache.get(key)
        if hit is None:
            keep = slice(None) if shift == 0 else (
                slice(None, -shift) if shift > 0 else slice(-shift, None))
            rows = (g_off[group] + r)[keep]
            cols = (lay.off[family] + r + shift)[keep]
            hit = (rows * n + cols, keep)
            _flat_cache[key] = hit
        return hit

    def nonneg(x: Array) -> Array:
        c, tnh, tih, tn, ti, duals, mu_end, d_beta, d_gamma, dt0 = split(x)
        beta_h, gamma_h = beta + d_beta, gamma + d_gamma
        t0_h = t0 + dt0
        lam = duals["lam"]
        lam_next = np.concatenate([lam[1:], [0.0]])
        end_sel = np.zeros(tau)
        end_sel[-1] = 1.0
        heater_slack_h = tih - c.d * t0_h - (1.0 - c.d) * tnh
        sis_m = duals["sis"] - nu_c * cp * c.m
        out = np.empty(n_nonneg)
        out[g_off["b_ml"] + r] = (params.theta1 + 2.0 * params.theta2 * c.m
                                  + nu_h * cp * heater_slack_h
                                  + nu_n * cp * (c.t_sn - c.t_s)
                                  + nu_c * cp * (tih - c.t_s)
                                  + lam * beta_h * (c.t_sn - tnh)
                                  + duals["smu"])
        out[g_off["s_ml"] + r] = c.m - params.m_lower
        out[g_off["smu"] + r] = duals["smu"]
        out[g_off["s_mu"] + r] = params.m_upper - c.m
        out[g_off["s_dl"] + r] = c.d - params.d_lower
        out[g_off["b_dl"] + r] = sis_m * (tnh - t0_h) + duals["sdu"]
        out[g_off["sdu"] + r] = duals["sdu"]
        out[g_off["s_du"] + r] = params.d_upper - c.d
        out[g_off["b_tl"] + r] = (sis_m * (c.d - 1.0)
                                  - lam * (1.0 + beta_h * c.m)
                                  - end_sel * mu_end
                                  + (1.0 - gamma_h) * lam_next
                                  + duals["su"])
        out[g_off["s_tl"] + r] = tnh - params.t_zone_lower
        out[g_off["su"] + r] = duals["su"]
        out[g_off["s_tu"] + r] = params.t_zone_upper - tnh
        out[g_off["b_snl"] + r] = (lam * beta_h * c.m + duals["sis"]
                                   - nu_c * cp * c.m + duals["ssnu"])
        out[g_off["s_snl"] + r] = c.t_sn - params.t_supply_lower
        out[g_off["ssnu"] + r] = duals["ssnu"]
        out[g_off["s_snu"] + r] = params.t_supply_upper - c.t_sn
        out[g_off["b_in"] + r] = nu_h * cp * c.m - sis_m
        out[g_off["s_in"] + r] = heater_slack_h
        out[g_off["b_is2"] + r] = nu_n * cp * c.m - sis_m
        out[g_off["s_is2"] + r] = c.t_sn - c.t_s
        out[g_off["sis"] + r] = duals["sis"]
        out[g_off["s_is"] + r] = tih - c.t_s
        out[g_off["ti_cool"] + r] = ti - c.t_s
        out[g_off["ti_mix"] + r] = ti - c.d * t0 - (1.0 - c.d) * tn
        return out

    def nonneg_jac(x: Array) -> Array:
        c, tnh, tih, tn, ti, duals, mu_end, d_beta, d_gamma, dt0 = split(x)
        beta_h, gamma_h = beta + d_beta, gamma + d_gamma
        t0_h = t0 + dt0
        lam = duals["lam"]
        lam_next = np.concatenate([lam[1:], [0.0]])
        sis_m = duals["sis"] - nu_c * cp * c.m
        J = np.zeros((n_nonneg, n))

        flat = J.reshape(-1)

        def put(group: str, family: str, vals, shift: int = 0) -> None:
            # every (group, family, shift) site touches distinct entries,
            # so plain assignment into the flat view is safe
            idx, keep = _flat_idx(group, family, shift)
            flat[idx] = vals[keep] if isinstance(vals, np.ndarray) else vals

        # b_ml
        put("b_ml", "m", 2.0 * params.theta2)
        put("b_ml", "d", -nu_h * cp * (t0_h - tnh))
        put("b_ml", "ts", -(nu_n + nu_c) * cp)
        put("b_ml", "tsn", nu_n * cp + lam * beta_h)
        put("b_ml", "tnh", -nu_h * cp * (1.0 - c.d) - lam * beta_h)
        put("b_ml", "tih", (nu_h + nu_c) * cp)
        put("b_ml", "lam", beta_h * (c.t_sn - tnh))
        put("b_ml", "smu", 1.0)
        if mode == "static":
            J[g_off["b_ml"] + r, lay.off["d_beta"]] = lam * (c.t_sn - tnh)
        else:
            put("b_ml", "dt0", -nu_h * cp * c.d)
        put("s_ml", "m", 1.0)
        put("smu", "smu", 1.0)
        put("s_mu", "m", -1.0)
        put("s_dl", "d", 1.0)
        # b_dl = sis_m*(tnh - t0_h) + sdu
        put("b_dl", "sis", tnh - t0_h)
        put("b_dl", "m", -nu_c * cp * (tnh - t0_h))
        put("b_dl", "tnh", sis_m)
        put("b_dl", "sdu", 1.0)
        if mode == "dynamic":
            put("b_dl", "dt0", -sis_m)
        put("sdu", "sdu", 1.0)
        put("s_du", "d", -1.0)
        # b_tl
        put("b_tl", "sis", c.d - 1.0)
        put("b_tl", "m", -nu_c * cp * (c.d - 1.0) - lam * beta_h)
        put("b_tl", "d", sis_m)
        put("b_tl", "lam", -(1.0 + beta_h * c.m))
        put("b_tl", "lam", np.full(tau, 1.0 - gamma_h), shift=1)
        put("b_tl", "su", 1.0)
        J[g_off["b_tl"] + tau - 1, lay.off["mu_end"]] = -1.0
        if mode == "static":
            J[g_off["b_tl"] + r, lay.off["d_beta"]] = -lam * c.m
            J[g_off["b_tl"] + r, lay.off["d_gamma"]] = -lam_next
        put("s_tl", "tnh", 1.0)
        put("su", "su", 1.0)
        put("s_tu", "tnh", -1.0)
        # b_snl
        put("b_snl", "lam", beta_h * c.m)
        put("b_snl", "m", lam * beta_h - nu_c * cp)
        put("b_snl", "sis", 1.0)
        put("b_snl", "ssnu", 1.0)
        if mode == "static":
            J[g_off["b_snl"] + r, lay.off["d_beta"]] = lam * c.m
        put("s_snl", "tsn", 1.0)
        put("ssnu", "ssnu", 1.0)
        put("s_snu", "tsn", -1.0)
        # b_in / s_in
        put("b_in", "m", (nu_h + nu_c) * cp)
        put("b_in", "sis", -1.0)
        put("s_in", "tih", 1.0)
        put("s_in", "d", -(t0_h - tnh))
        put("s_in", "tnh", -(1.0 - c.d))
        if mode == "dynamic":
            put("s_in", "dt0", -c.d)
        # b_is2 / s_is2
        put("b_is2", "m", (nu_n + nu_c) * cp)
        put("b_is2", "sis", -1.0)
        put("s_is2", "tsn", 1.0)
        put("s_is2", "ts", -1.0)
        put("sis", "sis", 1.0)
        put("s_is", "tih", 1.0)
        put("s_is", "ts", -1.0)
        # true duct pairing
        put("ti_cool", "ti", 1.0)
        put("ti_cool", "ts", -1.0)
        put("ti_mix", "ti", 1.0)
        put("ti_mix", "d", -(t0 - tn))
        put("ti_mix", "tn", -(1.0 - c.d))
        return J

    pairs = []
    for a, b in [("b_ml", "s_ml"), ("smu", "s_mu"), ("s_dl", "b_dl"),
                 ("sdu", "s_du"), ("b_tl", "s_tl"), ("su", "s_tu"),
                 ("b_snl", "s_snl"), ("ssnu", "s_snu"), ("b_in", "s_in"),
                 ("b_is2", "s_is2"), ("sis", "s_is"), ("ti_cool", "ti_mix")]:
        for t in range(tau):
            pairs.append((g_off[a] + t, g_off[b] + t))

    # rows that are plain shifted variables, pinnable through bounds
    simple: list[tuple[int, int, float]] = []
    for group, family, value in [
        ("s_ml", "m", params.m_lower), ("s_mu", "m", params.m_upper),
        ("smu", "smu", 0.0), ("s_dl", "d", params.d_lower),
        ("s_du", "d", params.d_upper), ("sdu", "sdu", 0.0),
        ("s_tl", "tnh", params.t_zone_lower), ("s_tu", "tnh", params.t_zone_upper),
        ("su", "su", 0.0), ("s_snl", "tsn", params.t_supply_lower),
        ("s_snu", "tsn", params.t_supply_upper), ("ssnu", "ssnu", 0.0),
        ("sis", "sis", 0.0),
    ]:
        for t in range(tau):
            simple.append((g_off[group] + t, lay.off[family] + t, value))

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[lay.rows("m")], upper[lay.rows("m")] = params.m_lower, params.m_upper
    lower[lay.rows("d")], upper[lay.rows("d")] = params.d_lower, params.d_upper
    lower[lay.rows("tsn")], upper[lay.rows("tsn")] = params.t_supply_lower, params.t_supply_upper
    lower[lay.rows("tnh")], upper[lay.rows("tnh")] = params.t_zone_lower, params.t_zone_upper
    lower[lay.rows("ts")], upper[lay.rows("ts")] = params.t_chiller_floor, 60.0
    lower[lay.rows("tih")], upper[lay.rows("tih")] = 0.0, 60.0
    lower[lay.rows("tn")], upper[lay.rows("tn")] = 0.0, 60.0
    lower[lay.rows("ti")], upper[lay.rows("ti")] = 0.0, 60.0
    for fam in _DUAL_FAMILIES:
        if fam != "lam":
            lower[lay.rows(fam)] = 0.0
    if mode == "static":
        lower[lay.off["d_beta"]], upper[lay.off["d_beta"]] = -0.8 * beta, 0.8 * beta
        lower[lay.off["d_gamma"]], upper[lay.off["d_gamma"]] = -0.8 * gamma, 0.8 * gamma
    else:
        lower[lay.rows("dt0")], upper[lay.rows("dt0")] = -5.0, 5.0

    prob = NlpProblem(
        n, obj, grad,
        eq_constraints=(Block(equalities, equalities_jac, 2 * tau + 1, "physics"),),
        ineq_constraints=(Block(budget, budget_jac, 1, "budget"),),
        nonneg_exprs=(Block(nonneg, nonneg_jac, n_nonneg, "kkt_system"),),
        comp_pairs=tuple(pairs),
        lower=lower, upper=upper,
        name=f"hvac_{mode}_attack_{tau}",
        simple_nonneg_rows=tuple(simple))
    return prob, lay


def _candidate_start(params: HvacParams, lay: _Layout, mode: str,
                     d_beta: float = 0.0, d_gamma: float = 0.0,
                     dt0: Array | None = None) -> tuple[Array, float]:
    """Feasible attacker-program point for given perturbations.

    Solves the controller's perceived problem, forward-simulates the true
    physics under its inputs, and packs primal variables plus dual estimates.
    Returns the point and its true power (the attacker's merit).
    """
    cs = _solve_controller(params, d_beta, d_gamma, dt0)
    t_n, t_i = simulate_true_states(params, cs.controls)
    x0 = np.zeros(lay.n)
    x0[lay.rows("m")] = cs.controls.m
    x0[lay.rows("d")] = cs.controls.d
    x0[lay.rows("ts")] = cs.controls.t_s
    x0[lay.rows("tsn")] = cs.controls.t_sn
    x0[lay.rows("tnh")] = cs.t_n
    x0[lay.rows("tih")] = cs.t_i
    x0[lay.rows("tn")] = t_n
    x0[lay.rows("ti")] = t_i
    x0[lay.rows("lam")] = cs.lam
    beta_hat = params.beta + d_beta
    x0[lay.rows("sis")] = np.maximum(
        0.0, params.nu_c * params.c_p * cs.controls.m
        - cs.lam * beta_hat * cs.controls.m)
    x0[lay.off["mu_end"]] = -cs.mu_end
    if mode == "static":
        x0[lay.off["d_beta"]] = d_beta
        x0[lay.off["d_gamma"]] = d_gamma
    else:
        x0[lay.rows("dt0")] = np.zeros(params.horizon) if dt0 is None else dt0
    fan, heater, zonal, chiller = true_power_series(params, cs.controls, t_n, t_i)
    return x0, float(np.sum(fan + heater + zonal + chiller))


def _extract_attack(params: HvacParams, lay: _Layout, mode: str,
                    pt: KktPoint) -> tuple[AttackOutcome, HvacTrajectory]:
    x = pt.x
    controls = Controls(lay.get(x, "m").copy(), lay.get(x, "d").copy(),
                        lay.get(x, "ts").copy(), lay.get(x, "tsn").copy())
    duals = {"lambda": lay.get(x, "lam").copy(),
             "mu_endpoint": np.array([lay.scalar(x, "mu_end")])}
    for fam in _DUAL_FAMILIES[1:]:
        duals["sigma_" + fam] = lay.get(x, fam).copy()
    traj = simulate_true_trajectory(
        params, controls,
        t_n_perceived=lay.get(x, "tnh").copy(),
        t_i_perceived=lay.get(x, "tih").copy(),
        duals=duals)
    if mode == "static":
        pert = {"d_beta": lay.scalar(x, "d_beta"),
                "d_gamma": lay.scalar(x, "d_gamma")}
        t0_hat = params.t0_series
    else:
        pert = {"d_t0": lay.get(x, "dt0").copy()}
        t0_hat = params.t0_series + pert["d_t0"]
    traj.perceived_power = perceived_power(
        params, controls, traj.t_n_perceived, traj.t_i_perceived, t0_hat=t0_hat)
    traj.diagnostics["attack_mpec"] = pt.residuals()
    action = np.concatenate([controls.m, controls.d, controls.t_s, controls.t_sn])
    outcome = AttackOutcome(
        perturbation=pert,
        defender_action=action,
        true_cost=traj.total_power,
        perceived_cost=traj.perceived_power,
        violation=0.0,
        solver_diagnostics={"attack_mpec": pt.residuals()},
    )
    return outcome, traj


def hvac_static_attack(params: HvacParams,
                       schedule: RelaxationSchedule | None = None,
                       tol: float = 1e-6,
                       n_angles: int = 8) -> tuple[AttackOutcome, HvacTrajectory]:
    """Thermal-coefficient perception attack solved by sequential relaxation.

    The attacker payoff is almost flat near zero perturbation (the gain is
    second order), so the solve is warm-started from the best of a boundary
    scan over the two-dimensional budget disk; the relaxation then polishes
    jointly. A zero budget forces zero perturbations and returns the
    baseline directly.
    """
    if params.delta_max == 0.0:
        base = hvac_baseline(params)
        outcome = _baseline_outcome(params, base, {"d_beta": 0.0, "d_gamma": 0.0})
        return outcome, base
    prob, lay = attack_problem(params, "static")
    radius = np.sqrt(2.0 * params.delta_max)
    best_x0, best_merit = _candidate_start(params, lay, "static")
    for k in range(n_angles):
        phi = 2.0 * np.pi * k / n_angles
        db = 0.98 * radius * np.cos(phi) * params.beta
        dg = 0.98 * radius * np.sin(phi) * params.gamma
        x0, merit = _candidate_start(params, lay, "static", d_beta=db, d_gamma=dg)
        if merit > best_merit:
            best_x0, best_merit = x0, merit
    pt = solve_mpec(prob, best_x0, schedule=schedule, tol=tol, n_starts=1)
    return _extract_attack(params, lay, "static", pt)


def hvac_dynamic_attack(params: HvacParams,
                        schedule: RelaxationSchedule | None = None,
                        tol: float = 1e-6) -> tuple[AttackOutcome, HvacTrajectory]:
    """Outside-temperature perception attack solved by sequential relaxation.

    Warm-started from the best of a few budget-sized temperature-shift
    profiles (uniform warm, uniform cold, rising ramp, none); the relaxation
    reallocates the per-step shifts from there.
    """
    if params.dynamic_budget == 0.0:
        base = hvac_baseline(params)
        outcome = _baseline_outcome(params, base,
                                    {"d_t0": np.zeros(params.horizon)})
        return outcome, base
    tau = params.horizon
    prob, lay = attack_problem(params, "dynamic")
    shapes = [np.zeros(tau), np.ones(tau), -np.ones(tau),
              np.linspace(0.5, 1.5, tau)]
    best_x0, best_merit = None, -np.inf
    for shape in shapes:
        nrm = float(np.linalg.norm(shape))
        dt0 = shape if nrm == 0.0 else shape * (
            0.98 * np.sqrt(2.0 * params.dynamic_budget) / nrm)
        x0, merit = _candidate_start(params, lay, "dynamic", dt0=dt0)
        if merit > best_merit:
            best_x0, best_merit = x0, merit
    pt = solve_mpec(prob, best_x0, schedule=schedule, tol=tol, n_starts=1)
    return _extract_attack(params, lay, "dynamic", pt)


def _baseline_outcome(params: HvacParams, base: HvacTrajectory,
                      pert: dict) -> AttackOutcome:
    action = np.concatenate([base.controls.m, base.controls.d,
                             base.controls.t_s, base.controls.t_sn])
    return AttackOutcome(
        perturbation=pert, defender_action=action,
        true_cost=base.total_power, perceived_cost=base.perceived_power,
        violation=0.0,
        solver_diagnostics=dict(base.diagnostics))
