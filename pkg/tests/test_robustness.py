"""Argmin-stability analysis: active sets, certificates, radius, sensitivity."""

import numpy as np
import pytest

from hypergameopt import fan, robustness
from hypergameopt.acceptance import _corner_model
from hypergameopt.errors import ActiveSetDegenerate, NotAKktPoint
from hypergameopt.nlp import KktPoint


@pytest.fixture(scope="module")
def fan_model(params):
    return fan.theta_linear_model(params)


@pytest.fixture(scope="module")
def fan_point(fan_model, params):
    return fan_model.solve(params.theta_arr, None)


@pytest.fixture(scope="module")
def corner():
    model = _corner_model()
    return model, model.solve(model.theta, None)


def test_active_sets_fan(fan_model, fan_point):
    sets = robustness.active_sets(fan_model, fan_point)
    assert sets.S == [0]
    assert sets.S_prime == [0]
    assert sets.R.shape == (3, 2)
    assert sets.T.shape == (1, 2)


def test_active_sets_rejects_bad_point(fan_model, fan_point):
    bad = KktPoint(x=fan_point.x + 0.5, lambda_eq=np.zeros(0),
                   lambda_ineq=fan_point.lambda_ineq,
                   stationarity_residual=0, feas_residual=0, comp_residual=0)
    with pytest.raises(NotAKktPoint):
        robustness.active_sets(fan_model, bad)


def test_active_sets_unconstrained():
    from hypergameopt.nlp import NlpProblem, solve_nlp

    def solve(theta, x0=None):
        prob = NlpProblem(
            1, objective=lambda x: float(theta[0] * (x[0] - 1.0) ** 2),
            gradient=lambda x: np.array([2.0 * theta[0] * (x[0] - 1.0)]))
        return solve_nlp(prob, np.zeros(1), tol=1e-9, n_starts=1)

    model = robustness.ThetaLinearModel(
        theta=np.array([1.0]),
        objective_terms=(robustness.FunPiece(
            lambda x: float((x[0] - 1.0) ** 2),
            lambda x: np.array([2.0 * (x[0] - 1.0)]),
            lambda x: np.array([[2.0]])),),
        constraints=(), solve=solve)
    pt = model.solve(model.theta, None)
    sets = robustness.active_sets(model, pt)
    assert sets.S == [] and sets.S_prime == []
    cert = robustness.robustness_radius(model, pt)
    assert cert.radius is None and not cert.span_condition


def test_lemma1_zero_shift(fan_model, fan_point):
    cert = robustness.lemma1_certificate(fan_model, fan_point, np.zeros(3),
                                         verify=False)
    assert cert.holds
    assert np.allclose(cert.delta_lambda, 0.0, atol=1e-12)


def test_lemma1_scaling_holds_and_verifies(fan_model, fan_point, params):
    cert = robustness.lemma1_certificate(fan_model, fan_point,
                                         0.5 * params.theta_arr)
    assert cert.holds
    assert cert.residual <= 1e-8
    assert cert.verified is True
    # scaling theta rescales the multiplier accordingly
    lam = fan_point.lambda_ineq[0]
    assert cert.delta_lambda[0] == pytest.approx(0.5 * lam, rel=1e-6)


def test_lemma1_unit_shift_fails_and_moves_argmin(fan_model, fan_point, params):
    cert = robustness.lemma1_certificate(fan_model, fan_point,
                                         np.array([1.0, 0.0, 0.0]), verify=False)
    assert not cert.holds
    moved = fan_model.solve(params.theta_arr + np.array([1.0, 0.0, 0.0]), None)
    assert np.max(np.abs(moved.x - fan_point.x)) > 1e-3


def test_fan_radius_is_none(fan_model, fan_point):
    cert = robustness.robustness_radius(fan_model, fan_point)
    assert not cert.span_condition
    assert cert.radius is None
    assert cert.active_set_S == [0]


def test_corner_radius_positive_and_sampled(corner):
    model, pt = corner
    cert = robustness.robustness_radius(model, pt)
    assert cert.span_condition
    assert cert.radius == pytest.approx(min(model.theta), rel=1e-6)
    failures = robustness.verify_radius(model, pt, cert.radius, samples=100)
    assert failures == []


def test_corner_radius_inf_norm(corner):
    model, pt = corner
    cert = robustness.robustness_radius(model, pt, norm_order=np.inf)
    assert cert.span_condition and cert.radius > 0


def test_cone_probe_fan(fan_model, fan_point, params):
    bad_dir = robustness.find_nonrobust_direction(fan_model, fan_point)[0]
    report = robustness.theta_cone_probe(
        fan_model, fan_point, samples=20,
        extra_candidates=(params.theta_arr + 0.8 * bad_dir,))
    # all positive scalings are members; the deliberately broken one is not
    scaling_results = report.results[:4]
    assert all(r.member for r in scaling_results)
    assert not report.results[-1].member
    assert len(report.members) >= 4
    # blends of members stay members
    blends = report.results[4:-1]
    assert all(r.member for r in blends)


def test_nonrobust_direction_fan(fan_model, fan_point, params):
    found = robustness.find_nonrobust_direction(fan_model, fan_point)
    assert found is not None
    direction, residual = found
    assert residual > 1e-8
    assert np.linalg.norm(direction) == pytest.approx(1.0, abs=1e-12)
    for eps in (1e-2, 1e-3):
        moved = fan_model.solve(params.theta_arr + eps * direction, None)
        assert np.max(np.abs(moved.x - fan_point.x)) > 1e-8


def test_nonrobust_direction_corner_none(corner):
    model, pt = corner
    assert robustness.find_nonrobust_direction(model, pt) is None


def test_sensitivity_matches_finite_differences(fan_model, fan_point, params):
    J = robustness.sensitivity_dtheta(fan_model, fan_point)
    h = 1e-6
    for k in range(3):
        up = params.theta_arr.copy()
        up[k] += h
        dn = params.theta_arr.copy()
        dn[k] -= h
        fd = (fan_model.solve(up, None).x - fan_model.solve(dn, None).x) / (2 * h)
        assert np.max(np.abs(fd - J[:, k])) / (1.0 + np.max(np.abs(fd))) <= 1e-3


def test_sensitivity_zero_along_certified_direction(fan_model, fan_point, params):
    # scaling the coefficients preserves the argmin, so the directional
    # derivative along theta itself vanishes
    J = robustness.sensitivity_dtheta(fan_model, fan_point)
    directional = J @ params.theta_arr
    assert np.max(np.abs(directional)) <= 1e-8


def test_sensitivity_corner_zero(corner):
    model, pt = corner
    J = robustness.sensitivity_dtheta(model, pt)
    assert np.allclose(J, 0.0, atol=1e-9)


def test_sensitivity_requires_strict_complementarity(fan_model, fan_point):
    loose = KktPoint(x=fan_point.x, lambda_eq=np.zeros(0),
                     lambda_ineq=np.zeros(1), stationarity_residual=np.inf,
                     feas_residual=0, comp_residual=0)
    # zero multiplier on the active envelope: S = {} but S' = {0}
    with pytest.raises((ActiveSetDegenerate, NotAKktPoint)):
        robustness.sensitivity_dtheta(fan_model, loose)


def test_envelope_center_sensitivity_nonzero(params, baseline):
    # active constraint depends on its parameters, so the optimum must too
    h = 1e-6
    for idx, name in ((0, "c_m"), (1, "c_p")):
        hi = dict(c_m=params.c_m, c_p=params.c_p)
        lo = dict(hi)
        hi[name] += h
        lo[name] -= h
        up = fan.fan_baseline(fan.FanParams(**hi), cross_check=False)
        dn = fan.fan_baseline(fan.FanParams(**lo), cross_check=False)
        fd = (up.action - dn.action) / (2 * h)
        assert np.max(np.abs(fd)) > 1e-3
