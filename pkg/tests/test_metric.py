import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contracta.certificate import (CONTRACTIVE, INVALID_METRIC, NOT_CONTRACTIVE, ContractionCertificate)
from contracta.errors import InputError
from contracta.flow import variational_flow
from contracta.linalg import FractionalDimension, omega_d, spd_inv_sqrt, spd_sqrt
from contracta.metric import (MetricField, CriterionRoots, certify_second_method, constant_metric,
                              criterion_roots, criterion_roots_batch, exponential_metric,
                              orbital_derivative, root_table, weighted_flow_expansion, xi_d)
from contracta.region import Region
from contracta.systems import (RigidBodyParams, rigid_body_system, rossler_reference_metric,
                               rossler_region, rossler_system)

import property_checks as pc
from conftest import linear_system

D25 = FractionalDimension(2.5, 3)
BOX = Region((-1, -1, -1), (1, 1, 1), (3, 3, 3))
TAU_C = 4 * math.sqrt(3)


# --------------------------------------------------------------------- roots

def test_roots_linear_example():
    roots = criterion_roots(np.diag([-1.0, -2.0, -3.0]), np.eye(3), np.zeros((3, 3)))
    np.testing.assert_allclose(roots.lambdas, [-2, -4, -6])


def test_roots_rigid_body_example():
    rb = rigid_body_system(RigidBodyParams(delta=1.0))
    w2 = 1.7
    roots = criterion_roots(rb.system.jac([0.0, w2, 0.0]), rb.P0, np.zeros((3, 3))).lambdas
    expected = [-2 + 2 * abs(w2) * rb.rho, -2, -2 - 2 * abs(w2) * rb.rho]
    np.testing.assert_allclose(roots, expected, atol=1e-9)


def test_dual_route(rng):
    assert pc.dual_route_error(rng, 500) <= 1e-9


def test_similarity_invariance(rng):
    assert pc.similarity_error(rng) <= 1e-8


def test_roots_trace_identity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(n, n))
        P = pc.random_spd(rng, n, 0.2)
        D = rng.normal(size=(n, n))
        D = D + D.T
        lam = criterion_roots(A, P, D).lambdas
        assert np.all(np.diff(lam) <= 0)
        tr = np.trace(np.linalg.solve(P, A.T @ P + P @ A + D))
        assert lam.sum() == pytest.approx(tr, rel=1e-8, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31 - 1))
def test_scaling_invariance(c, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    P = pc.random_spd(rng, 3, 0.2)
    D = rng.normal(size=(3, 3))
    D = D + D.T
    a = criterion_roots(A, P, D).lambdas
    b = criterion_roots(A, c * P, c * D).lambdas
    assert np.abs(a - b).max() <= 1e-10 * (1 + np.abs(a).max())


def test_roots_reject_bad_metric():
    with pytest.raises(InputError):
        criterion_roots(np.eye(2), np.diag([1.0, -1.0]), np.zeros((2, 2)))
    with pytest.raises(InputError):
        criterion_roots(np.eye(3), np.eye(2), np.zeros((2, 2)))


def test_batch_matches_single(rng):
    A = rng.normal(size=(20, 3, 3))
    P = np.stack([pc.random_spd(rng, 3) for _ in range(20)])
    D = rng.normal(size=(20, 3, 3))
    P[7] = -np.eye(3)
    roots, bad = criterion_roots_batch(A, P, D)
    assert bad.tolist() == [i == 7 for i in range(20)]
    for i in (0, 5, 19):
        np.testing.assert_allclose(roots[i], criterion_roots(A[i], P[i], D[i]).lambdas, atol=1e-12)


# ------------------------------------------------------------------------ Xi

def test_xi_examples():
    f, r = xi_d(CriterionRoots(np.array([-2.0, -4.0, -6.0])), D25)
    assert (f, r) == (-9.0, -11.0)
    f, r = xi_d(CriterionRoots(np.array([1.0, 0.0, -1.0])), FractionalDimension(2, 3))
    assert (f, r) == (1.0, -1.0)
    for d in (0.4, 1.5, 3.0):
        f, r = xi_d(CriterionRoots(np.full(3, -1.5)), FractionalDimension(d, 3))
        assert f == pytest.approx(-1.5 * d) and r == pytest.approx(-1.5 * d)


def test_xi_length_mismatch():
    with pytest.raises(InputError):
        xi_d(CriterionRoots(np.ones(2)), D25)


# -------------------------------------------------------- orbital derivative

def test_orbital_derivative_constant(rng):
    field_ = constant_metric(np.diag([1.0, 2.0, 3.0]))
    ros = rossler_system().system
    np.testing.assert_array_equal(orbital_derivative(field_, ros, rng.normal(size=3)), 0)


def test_orbital_derivative_rigid_body(rng):
    rb = rigid_body_system(RigidBodyParams(tau=2.0))
    field_ = exponential_metric(rb.P0, 0.3, rb.energy)
    numeric = MetricField(field_.P)
    for x in rng.normal(0, 1, (10, 3)):
        an = orbital_derivative(field_, rb.system, x)
        np.testing.assert_allclose(an, 0.3 * rb.energy.vdot(x) * field_.P(x), rtol=1e-14)
        nu = orbital_derivative(numeric, rb.system, x)
        assert np.abs(nu - an).max() <= 1e-6 * np.abs(an).max()


def test_orbital_derivative_rossler(rng):
    ros = rossler_system()
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    numeric = MetricField(field_.P)
    a, b = 0.386, 0.2
    for x in rng.normal(0, 2, (10, 3)):
        y = x[1]
        expected = tau * ((a + b) * y - a * y * y) * field_.P(x)
        np.testing.assert_allclose(orbital_derivative(field_, ros.system, x), expected, rtol=1e-12, atol=1e-14)
        nu = orbital_derivative(numeric, ros.system, x)
        assert np.abs(nu - expected).max() <= 1e-6 * (1e-12 + np.abs(expected).max())


# ----------------------------------------------------------------- certify

def test_certify_linear(diag_sys):
    cert = certify_second_method(diag_sys, constant_metric(np.eye(3)), BOX, D25)
    assert cert.bound == pytest.approx(-9.0)
    assert cert.reverse_bound == pytest.approx(-11.0)
    assert cert.decay_rate == pytest.approx(-4.5)
    assert cert.verdict == CONTRACTIVE


def test_certify_rossler_fixture_above_threshold():
    ros = rossler_system()
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    cert = certify_second_method(ros.system, field_, rossler_region(0.005), FractionalDimension(2.6057, 3))
    assert cert.verdict == CONTRACTIVE


@pytest.mark.xfail(strict=True, reason="the published metric gives Lambda = +3.98e-5 at y = -0.015 "
                                        "for d = 2.60557; it certifies only from s = 0.605609")
def test_certify_rossler_fixture_published_dimension():
    ros = rossler_system()
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    cert = certify_second_method(ros.system, field_, rossler_region(0.005), FractionalDimension(2.60557, 3))
    assert cert.bound < 0


def test_rossler_fixture_margin_is_tiny():
    ros = rossler_system()
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    cert = certify_second_method(ros.system, field_, rossler_region(0.005), FractionalDimension(2.60557, 3))
    assert 0 < cert.bound < 1e-4
    assert cert.grid_meta["argmax"][1] == pytest.approx(-0.015, abs=1e-9)


def test_rigid_body_family_fails_above_threshold(rng):
    rb = rigid_body_system(RigidBodyParams(tau=1.01 * TAU_C))
    reg = rb.trapping_region((5, 5, 5))
    dim = FractionalDimension(2, 3)
    for _ in range(10):
        G = rng.normal(size=(3, 3))
        P0 = G @ G.T + 0.1 * np.eye(3)
        gamma = rng.uniform(0, 2)
        cert = certify_second_method(rb.system, exponential_metric(P0, gamma, rb.energy), reg, dim)
        assert cert.bound >= 0
    cert = certify_second_method(rb.system, exponential_metric(rb.P0, 0.1, rb.energy), reg, dim)
    assert cert.verdict == NOT_CONTRACTIVE


def test_invalid_metric_reports_point(diag_sys):
    field_ = MetricField(lambda x: np.eye(3) * (1.0 if x[0] < 0.5 else -1.0), lambda x: np.zeros((3, 3)))
    cert = certify_second_method(diag_sys, field_, BOX, D25)
    assert cert.verdict == INVALID_METRIC
    assert cert.offending_point[0] == 1.0
    assert "offendingPoint" in cert.to_dict()


def test_certify_dimension_mismatch(diag_sys):
    with pytest.raises(InputError):
        certify_second_method(diag_sys, constant_metric(np.eye(3)), BOX, FractionalDimension(1.5, 2))


def test_certificate_export(diag_sys):
    d = certify_second_method(diag_sys, constant_metric(np.eye(3)), BOX, D25).to_dict()
    assert {"method", "d", "Lambda", "LambdaMinus", "decayRate", "verdict", "grid", "margins",
            "toolVersion"} <= set(d)
    assert d["grid"]["points"] == 27 and d["grid"]["argmax"] is not None


def test_certificate_invariant():
    with pytest.raises(InputError):
        ContractionCertificate(method="second", dim=D25, bound=0.1, verdict=CONTRACTIVE)


def test_root_table_numeric_path_threads(diag_sys):
    field_ = MetricField(lambda x: np.diag([1.0, 2.0, 3.0]) * math.exp(x[0]))
    a = root_table(diag_sys, field_, BOX.points(), D25, workers=1)
    b = root_table(diag_sys, field_, BOX.points(), D25, workers=3)
    np.testing.assert_array_equal(a.roots, b.roots)
    # analytic orbital derivative is -x1 P; roots shift by -x1
    shift = -BOX.points()[:, 0]
    np.testing.assert_allclose(a.roots, np.array([-2, -4, -6]) + shift[:, None], atol=1e-6)


# ---------------------------------------------------------------- expansion

def test_expansion_examples(zero_sys, diag_sys):
    rep = weighted_flow_expansion(zero_sys, constant_metric(np.eye(3)), BOX, D25, 2.0, Lambda=0.0)
    assert rep.omega_max == pytest.approx(1.0) and rep.holds
    rep = weighted_flow_expansion(diag_sys, constant_metric(np.eye(3)), BOX, D25, 1.0, Lambda=-9.0)
    assert rep.omega_max == pytest.approx(math.exp(-4.5), rel=1e-8)
    assert rep.holds


def test_expansion_rejects_t(diag_sys):
    with pytest.raises(InputError):
        weighted_flow_expansion(diag_sys, constant_metric(np.eye(3)), BOX, D25, 0.0)


def test_expansion_bound_on_certified_runs():
    gap, lam = pc.expansion_bound_gap()
    assert lam < 0
    assert gap >= -math.log1p(1e-6)


def _Y(sys, field_, x, t):
    st = variational_flow(sys, x, t)
    return spd_sqrt(field_.P(st.x)) @ st.matrix() @ spd_inv_sqrt(field_.P(x)), st.x


def test_telescoping(rng):
    rb = rigid_body_system(RigidBodyParams(tau=3.0))
    field_ = exponential_metric(rb.P0, 0.1, rb.energy)
    for _ in range(5):
        x = rng.normal(0, 1, 3)
        t = rng.uniform(0.5, 2.0)
        tau = rng.uniform(0, t)
        dim = pc.random_dim(rng, 3)
        Yt, _ = _Y(rb.system, field_, x, t)
        Ytau, y = _Y(rb.system, field_, x, tau)
        Yrest, _ = _Y(rb.system, field_, y, t - tau)
        assert omega_d(Yt, dim) <= omega_d(Yrest, dim) * omega_d(Ytau, dim) * (1 + 1e-8)
