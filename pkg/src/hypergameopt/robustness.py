"""When can manipulated objective coefficients not move the optimum?

For parameter-linear objectives J(u, theta) = sum_k theta_k f_k(u) over a
convex feasible set g(u) <= 0, the machinery here decides whether a
coefficient perturbation can change the argmin at all: active sets and their
gradient spans, the multiplier-shift certificate for a specific perturbation,
a guaranteed-safe perturbation radius when the objective-gradient span sits
inside the active-gradient span, an empirical probe of the convex unbounded
set of argmin-preserving coefficients, the construction of an arbitrarily
small argmin-breaking direction when the span condition fails, and the local
sensitivity of the optimum under strict complementarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import lsq_linear

from .errors import (
    ActiveSetDegenerate,
    NotAKktPoint,
    NotThetaLinear,
    RankDeficientT,
    SingularKktJacobian,
)
from .nlp import KktPoint

Array = np.ndarray

RANK_TOL = 1e-10     # relative singular-value cutoff for span decisions


@dataclass(frozen=True)
class FunPiece:
    """Scalar function of the decision vector with derivatives."""

    fun: Callable[[Array], float]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array] | None = None


@dataclass(frozen=True)
class ThetaLinearModel:
    """Parameter-linear program: minimize theta @ f(u) subject to g(u) <= 0.

    `solve(theta, x0)` must return a KKT point of that program (multi-start
    inside the solver is the caller's concern; argmin comparisons here trust
    it to find the global optimum for nonnegative theta).
    """

    theta: Array
    objective_terms: tuple[FunPiece, ...]
    constraints: tuple[FunPiece, ...]
    solve: Callable[[Array, Array | None], KktPoint]

    def __post_init__(self) -> None:
        th = np.asarray(self.theta, dtype=float)
        if th.ndim != 1 or th.size != len(self.objective_terms):
            raise NotThetaLinear(
                f"theta has {th.size} entries for {len(self.objective_terms)} "
                "objective terms")
        object.__setattr__(self, "theta", th)

    def objective_jacobian(self, x: Array) -> Array:
        """Rows are the objective-term gradients at x (the matrix whose
        theta-weighted sum is the objective gradient)."""
        return np.vstack([t.grad(x) for t in self.objective_terms])

    def constraint_values(self, x: Array) -> Array:
        return np.array([g.fun(x) for g in self.constraints])

    def constraint_jacobian(self, x: Array) -> Array:
        if not self.constraints:
            return np.zeros((0, np.asarray(x).size))
        return np.vstack([g.grad(x) for g in self.constraints])


@dataclass
class ActiveSets:
    S: list[int]                 # strictly positive multipliers
    S_prime: list[int]           # active constraints
    R: Array                     # objective-term gradients, one per row
    T: Array                     # active-constraint gradients for S
    T_prime: Array               # same for S_prime


@dataclass
class RobustnessCertificate:
    active_set_S: list[int]
    active_set_Sprime: list[int]
    span_condition: bool
    radius: float | None
    lambda_min: float | None
    pinv_norm: float | None
    norm_order: float


@dataclass
class Lemma1Certificate:
    holds: bool
    delta_lambda: Array | None
    residual: float
    verified: bool | None = None     # re-solve confirmation, when requested


@dataclass
class ConeProbeResult:
    theta_hat: Array
    member: bool
    displacement: float


@dataclass
class ConeProbeReport:
    members: list[Array] = field(default_factory=list)
    results: list[ConeProbeResult] = field(default_factory=list)

    @property
    def failures(self) -> list[ConeProbeResult]:
        return [r for r in self.results if not r.member]


def _check_kkt(model: ThetaLinearModel, point: KktPoint, tol: float) -> None:
    x = np.asarray(point.x, dtype=float)
    lam = np.asarray(point.lambda_ineq, dtype=float)
    if lam.size != len(model.constraints):
        raise NotAKktPoint("multiplier count does not match constraint count")
    g = model.constraint_values(x)
    if np.any(g > tol):
        raise NotAKktPoint(f"infeasible by {np.max(g):.3e}")
    if np.any(lam < -tol):
        raise NotAKktPoint(f"negative multiplier {np.min(lam):.3e}")
    grad = model.theta @ model.objective_jacobian(x)
    if lam.size:
        grad = grad + lam @ model.constraint_jacobian(x)
    if np.max(np.abs(grad), initial=0.0) > tol:
        raise NotAKktPoint(f"stationarity residual {np.max(np.abs(grad)):.3e}")


def active_sets(model: ThetaLinearModel, point: KktPoint, tol: float = 1e-6,
                kkt_tol: float = 1e-5) -> ActiveSets:
    """Split constraints into the positive-multiplier set S and the active
    set S', and collect the gradient families R, T, T' at the point."""
    _check_kkt(model, point, kkt_tol)
    x = np.asarray(point.x, dtype=float)
    lam = np.asarray(point.lambda_ineq, dtype=float)
    g = model.constraint_values(x)
    s_prime = [l for l in range(g.size) if abs(g[l]) <= tol]
    s = [l for l in s_prime if lam[l] > tol]
    G = model.constraint_jacobian(x)
    return ActiveSets(
        S=s, S_prime=s_prime,
        R=model.objective_jacobian(x),
        T=G[s] if s else np.zeros((0, x.size)),
        T_prime=G[s_prime] if s_prime else np.zeros((0, x.size)),
    )


def _span_contains(T: Array, R: Array) -> bool:
    """True when every row of R lies in the row span of T."""
    if R.size == 0:
        return True
    if T.size == 0:
        return False
    s_t = np.linalg.svd(T, compute_uv=False)
    cut = RANK_TOL * max(s_t[0], 1.0)
    rank_t = int(np.sum(s_t > cut))
    s_both = np.linalg.svd(np.vstack([T, R]), compute_uv=False)
    rank_both = int(np.sum(s_both > cut))
    return rank_both == rank_t


def _argmin_displacement(model: ThetaLinearModel, point: KktPoint,
                         theta_hat: Array, x0: Array | None = None) -> float:
    new = model.solve(np.asarray(theta_hat, dtype=float), x0)
    return float(np.max(np.abs(np.asarray(new.x) - np.asarray(point.x))))


def lemma1_certificate(model: ThetaLinearModel, point: KktPoint,
                       delta_theta: Array, tol: float = 1e-8,
                       verify: bool = True,
                       verify_tol: float = 1e-6) -> Lemma1Certificate:
    """Search for a multiplier shift that absorbs the coefficient shift.

    Looks for delta_lambda >= -lambda, supported on the active set, with
    delta_theta @ df/du + delta_lambda @ dg/du = 0. When it exists the argmin
    provably survives the shift; with `verify` a re-solve at the shifted
    coefficients (from a perturbed start) confirms that.
    """
    delta_theta = np.asarray(delta_theta, dtype=float)
    if np.any(model.theta + delta_theta < 0):
        raise NotThetaLinear("shifted coefficients must stay nonnegative")
    sets = active_sets(model, point)
    x = np.asarray(point.x, dtype=float)
    lam = np.asarray(point.lambda_ineq, dtype=float)
    v = delta_theta @ sets.R                      # must be cancelled by T'
    n_lam = len(sets.S_prime)
    if n_lam == 0:
        residual = float(np.max(np.abs(v), initial=0.0))
        holds = residual <= tol
        dl = np.zeros(lam.size) if holds else None
    else:
        A = sets.T_prime.T                        # n_u x |S'|
        lb = -lam[sets.S_prime]
        res = lsq_linear(A, -v, bounds=(lb, np.full(n_lam, np.inf)))
        residual = float(np.max(np.abs(A @ res.x + v)))
        holds = residual <= tol
        dl = None
        if holds:
            dl = np.zeros(lam.size)
            dl[sets.S_prime] = res.x
    cert = Lemma1Certificate(holds=holds, delta_lambda=dl, residual=residual)
    if holds and verify:
        start = x + 0.05 * (1.0 + np.abs(x))
        disp = _argmin_displacement(model, point, model.theta + delta_theta, start)
        cert.verified = disp <= verify_tol
    return cert


def _induced_norm(M: Array, order: float) -> float:
    if M.size == 0:
        return 0.0
    if order == 2:
        return float(np.linalg.svd(M, compute_uv=False)[0])
    if order == np.inf:
        return float(np.max(np.sum(np.abs(M), axis=1)))
    raise ValueError("norm_order must be 2 or inf")


def robustness_radius(model: ThetaLinearModel, point: KktPoint,
                      norm_order: float = 2) -> RobustnessCertificate:
    """Guaranteed-safe perturbation radius when span R is inside span T.

    radius = lambda_min / ||F A^+||_p with A the matrix of positive-multiplier
    active-constraint gradients; any coefficient shift smaller than it (with
    the shifted coefficients still nonnegative) provably leaves the argmin
    fixed. Returns span_condition=False and no radius when the span test
    fails.
    """
    sets = active_sets(model, point)
    lam = np.asarray(point.lambda_ineq, dtype=float)
    cert = RobustnessCertificate(
        active_set_S=sets.S, active_set_Sprime=sets.S_prime,
        span_condition=False, radius=None, lambda_min=None, pinv_norm=None,
        norm_order=norm_order)
    if not sets.S:
        return cert
    if not _span_contains(sets.T, sets.R):
        return cert
    cert.span_condition = True
    A = sets.T
    s_vals = np.linalg.svd(A, compute_uv=False)
    if s_vals.size == 0 or s_vals[0] <= 0:
        raise RankDeficientT("active-gradient matrix has no usable rank")
    A_pinv = np.linalg.pinv(A, rcond=RANK_TOL)
    lam_min = float(np.min(lam[sets.S]))
    pinv_norm = _induced_norm(sets.R @ A_pinv, norm_order)
    if pinv_norm <= 0:
        raise RankDeficientT("pseudo-inverse norm vanished")
    cert.lambda_min = lam_min
    cert.pinv_norm = pinv_norm
    cert.radius = lam_min / pinv_norm
    return cert


def sample_radius_ball(radius: float, dim: int, samples: int, norm_order: float,
                       seed: int = 0) -> Array:
    """Deterministic sample of perturbations with p-norm <= radius."""
    rng = np.random.default_rng(seed)
    out = np.empty((samples, dim))
    for i in range(samples):
        v = rng.standard_normal(dim)
        if norm_order == 2:
            v = v / np.linalg.norm(v)
        else:
            v = v / np.max(np.abs(v))
        out[i] = v * radius * rng.uniform(0.2, 1.0)
    return out


def verify_radius(model: ThetaLinearModel, point: KktPoint, radius: float,
                  samples: int = 100, norm_order: float = 2, seed: int = 0,
                  tol: float = 1e-6) -> list[Array]:
    """Re-solve at sampled in-radius shifts; returns the shifts that moved
    the argmin (empty when the certificate held empirically)."""
    failures = []
    for d in sample_radius_ball(radius, model.theta.size, samples, norm_order, seed):
        theta_hat = model.theta + d
        if np.any(theta_hat < 0):
            continue
        if _argmin_displacement(model, point, theta_hat) > tol:
            failures.append(d)
    return failures


def theta_cone_probe(model: ThetaLinearModel, point: KktPoint,
                     samples: int = 50, scalings: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0),
                     blend_weights: tuple[float, ...] = (0.25, 0.5, 0.75),
                     extra_candidates: tuple[Array, ...] = (),
                     seed: int = 0, tol: float = 1e-6) -> ConeProbeReport:
    """Empirically probe the set of coefficient vectors preserving the argmin.

    Verifies that positive scalings of the original coefficients stay inside,
    then that convex blends of any two verified members stay inside; extra
    candidates (for instance deliberately broken ones) are tested as given.
    Membership is decided by re-solving and comparing the argmin.
    """
    report = ConeProbeReport()

    def test(theta_hat: Array) -> bool:
        theta_hat = np.asarray(theta_hat, dtype=float)
        if np.any(theta_hat < 0):
            return False
        disp = _argmin_displacement(model, point, theta_hat)
        member = disp <= tol
        report.results.append(ConeProbeResult(theta_hat, member, disp))
        if member:
            report.members.append(theta_hat)
        return member

    for c in scalings:
        test(c * model.theta)
    rng = np.random.default_rng(seed)
    budget = max(0, samples - len(report.results))
    for _ in range(budget):
        if len(report.members) < 2:
            break
        i, j = rng.integers(0, len(report.members), size=2)
        a = blend_weights[int(rng.integers(0, len(blend_weights)))]
        test(a * report.members[i] + (1.0 - a) * report.members[j])
    for cand in extra_candidates:
        test(np.asarray(cand, dtype=float))
    return report


def find_nonrobust_direction(model: ThetaLinearModel, point: KktPoint,
                             tol: float = 1e-8) -> tuple[Array, float] | None:
    """Unit coefficient direction whose objective-gradient image leaves the
    active-gradient span, or None when no such direction exists.

    Arbitrarily small steps along the returned direction change the argmin;
    the second element is the projection residual of its image.
    """
    sets = active_sets(model, point)
    R = sets.R
    Tp = sets.T_prime
    if Tp.size:
        # project each objective gradient off the row span of T'
        _u, s, vt = np.linalg.svd(Tp, full_matrices=False)
        rank = int(np.sum(s > RANK_TOL * max(s[0], 1.0)))
        V = vt[:rank]
        M = R - (R @ V.T) @ V
    else:
        M = R
    # delta @ M is the unabsorbable part of the shifted gradient; pick the
    # unit delta that maximizes it
    u_m, s_m, _vt_m = np.linalg.svd(M, full_matrices=False)
    if s_m.size == 0 or s_m[0] <= tol * max(1.0, float(np.linalg.norm(R))):
        return None
    direction = u_m[:, 0]
    residual = float(s_m[0])
    return direction, residual


def sensitivity_dtheta(model: ThetaLinearModel, point: KktPoint,
                       cond_limit: float = 1e12) -> Array:
    """Local derivative of the optimum with respect to the coefficients.

    Differentiates stationarity plus the active constraints under strict
    complementarity (S = S' required). Returns du/dtheta with one column per
    coefficient; validated externally against finite differences of
    re-solves.
    """
    sets = active_sets(model, point)
    if sets.S != sets.S_prime:
        raise ActiveSetDegenerate(
            f"strict complementarity fails: S={sets.S} vs S'={sets.S_prime}")
    x = np.asarray(point.x, dtype=float)
    lam = np.asarray(point.lambda_ineq, dtype=float)
    n = x.size
    n_active = len(sets.S)

    H = np.zeros((n, n))
    for th_k, term in zip(model.theta, model.objective_terms):
        if term.hess is None:
            raise NotThetaLinear("objective terms need Hessians for sensitivities")
        H += th_k * np.asarray(term.hess(x), dtype=float)
    for l in sets.S:
        piece = model.constraints[l]
        if piece.hess is None:
            raise NotThetaLinear("constraints need Hessians for sensitivities")
        H += lam[l] * np.asarray(piece.hess(x), dtype=float)

    G = sets.T
    K = np.zeros((n + n_active, n + n_active))
    K[:n, :n] = H
    K[:n, n:] = G.T
    K[n:, :n] = G
    if np.linalg.cond(K) > cond_limit:
        raise SingularKktJacobian(f"KKT matrix condition {np.linalg.cond(K):.3e}")
    rhs = np.zeros((n + n_active, model.theta.size))
    for k, term in enumerate(model.objective_terms):
        rhs[:n, k] = -np.asarray(term.grad(x), dtype=float)
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularKktJacobian(str(exc)) from exc
    return sol[:n]
