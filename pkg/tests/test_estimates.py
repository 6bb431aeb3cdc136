import math

import numpy as np
import pytest

from gravvortex.estimates import k_curvature_values, run_all, weitzenbock_values, _Derived
from gravvortex.green import multipole
from gravvortex.sphere_spectral import ScalarField, evaluate_at, grad_sq0, lambda1, laplacian0


@pytest.fixture(scope="module")
def rep_tps24(tps24):
    return run_all(tps24)


@pytest.fixture(scope="module")
def rep_ts48(ts48):
    return run_all(ts48)


@pytest.fixture(scope="module")
def rep_tps0(tps0):
    return run_all(tps0)


def test_reports_pass(rep_tps24, rep_ts48, rep_tps0):
    for rep in (rep_tps24, rep_ts48, rep_tps0):
        assert rep.passed, rep.table()


@pytest.mark.parametrize("fixture", ["rep_tps24", "rep_ts48", "rep_tps0"])
def test_mass_identity(fixture, request):
    rec = request.getfixturevalue(fixture)["mass_identity"]
    mass = float(rec.note.split("=")[1])
    assert abs(mass - 2.0) < 1e-7


def test_substituted_bounds(rep_tps24, rep_ts48):
    assert rep_tps24["b_sup"].bound == pytest.approx(192.0, rel=1e-14)
    assert rep_ts48["b_sup"].bound == pytest.approx(528.0, rel=1e-14)
    assert rep_tps24["S_g_max"].bound == pytest.approx(10.5, rel=1e-14)
    assert rep_tps24["S_k_min"].bound == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert rep_tps24["S_k_max"].bound == pytest.approx(2.5, rel=1e-14)
    # (3/2) alpha tau^2 (2c + 2 alpha tau^2 + tau)^2 = 2.25 * 11^2
    assert rep_tps24["grad_S_k_sq"].bound == pytest.approx(272.25, rel=1e-14)
    for name in ("b_sup", "S_g_max", "S_k_min", "S_k_max", "grad_S_k_sq"):
        assert rep_tps24[name].passed


def test_decoupled_endpoint(rep_tps0, tps0):
    assert rep_tps0["S_g_min"].measured == pytest.approx(2.0, abs=1e-8)
    assert rep_tps0["S_g_max"].measured <= 9.0
    assert rep_tps0["b_sup"].note.startswith("skipped")
    # k = g at alpha = 0
    assert np.max(np.abs(k_curvature_values(tps0) - 2.0)) < 1e-14
    assert rep_tps0["lambda1"].measured == pytest.approx(4.0, abs=1e-8)


def test_scalar_identity_residual(rep_tps24, tps24):
    scale = abs(tps24.c) + tps24.alpha * tps24.tau**2
    assert rep_tps24["scalar_identity"].measured < 1e-6 * scale
    assert rep_tps24["S_g_floor"].measured >= tps24.c - 1e-8


def test_lambda1_lower_bound(tps24):
    assert lambda1(tps24.phi) >= tps24.c - 1e-6


def test_weitzenbock(tps24, ts48):
    for s in (tps24, ts48):
        d = _Derived(s)
        W, terms, lap_b = weitzenbock_values(s, d)
        scale = 1.0 + sum(np.max(np.abs(t)) for t in terms)
        assert W.min() >= -1e-5 * scale
        k = np.argmax(d.b)
        assert -lap_b.flat[k] <= 1e-6 * scale


def test_b_and_weitzenbock_at_simple_zero(tps24):
    # near a simple zero Phi ~ A rho^2 (rho the g0 distance), so b -> 4 A e^{-phi}
    s = tps24
    d = _Derived(s)
    pole = np.array([[0.0, 0.0, 1.0]])
    t = np.array([1e-4, 2e-4])
    pts = np.stack([np.sin(t), 0 * t, np.cos(t)], axis=-1)
    Phi_near = np.exp(s.v.evaluate(pts).real) * multipole(s.divisor).exp4pi(pts)
    rho2 = t**2 / 2.0
    A = 2 * Phi_near[0] / rho2[0] - Phi_near[1] / rho2[1]  # Richardson in rho^2
    phi_p = s.phi.evaluate(pole).real[0]
    b_p = evaluate_at(d.b_field.coeffs, pole).real[0]
    assert abs(b_p - 4 * A * math.exp(-phi_p)) < 1e-6 * b_p
    # W at the pole, with Phi = 0 there
    lap_b = 0.5 * math.exp(-phi_p) * evaluate_at(laplacian0(d.b_field).coeffs, pole).real[0]
    a, c, tau = s.alpha, s.c, s.tau
    W = -lap_b - (a * b_p + c + tau * (a * tau - 1.5)) * b_p
    assert W >= -1e-5 * (1 + abs(lap_b) + abs(b_p) * (a * b_p + c + tau * (a * tau + 1.5)))


def test_b_is_the_gradient_quotient(ts48):
    # b = |grad Phi|_g^2 / Phi away from the divisor, by differentiating Phi directly
    s = ts48
    fine = s.grid.fine
    Phi = s.Phi_values(fine)
    Pf = ScalarField(fine, values=Phi)
    grad = grad_sq0(Pf).values * np.exp(-fine.synthesize(s.phi.coeffs))
    b = s.b_values(fine)
    far = Phi > 0.5
    assert np.max(np.abs(grad[far] / Phi[far] - b[far])) < 1e-6 * np.max(b)


def test_report_serialization(rep_tps24):
    d = rep_tps24.to_dict()
    assert d["passed"] is True and len(d["records"]) == len(rep_tps24.records)
    assert "b_sup" in rep_tps24.table()
