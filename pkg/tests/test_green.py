import math

import numpy as np
import pytest
from scipy.special import eval_legendre

from gravvortex.divisor import Divisor, antipodal, equatorial
from gravvortex.errors import ArgumentError
from gravvortex.green import conformal_shift, green_round, kahler_potential, multipole
from gravvortex.sphere_spectral import ScalarField, make_grid, quadrature


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def spectral_sum(c, degree=2048):
    """``-sum_k (2k+1)/(4 pi k (k+1)) P_k(c)`` summed to ``degree``.

    The partial sums oscillate, so they are smoothed by repeated averaging
    of neighbours before the last one is taken.
    """
    k = np.arange(1, degree + 1)
    s = np.cumsum(-(2 * k + 1) / (4 * math.pi * k * (k + 1)) * eval_legendre(k, c))
    for _ in range(40):
        s = 0.5 * (s[1:] + s[:-1])
    return s[-1]


def test_symmetry():
    rng = np.random.default_rng(0)
    P, Q = unit(rng.standard_normal((200, 3))), unit(rng.standard_normal((200, 3)))
    assert np.max(np.abs(green_round(P, Q) - green_round(Q, P))) < 1e-10


def test_antipodal_value_against_spectral_sum():
    val = green_round(np.array([0, 0, 1.0]), np.array([0, 0, -1.0]))
    ref = spectral_sum(-1.0)
    assert abs(val - ref) < 1e-8 * abs(ref)


@pytest.mark.parametrize("c", [0.3, -0.6])
def test_generic_value_against_spectral_sum(c):
    P = np.array([0, 0, 1.0])
    Q = np.array([math.sqrt(1 - c * c), 0, c])
    assert abs(green_round(P, Q) - spectral_sum(c)) < 1e-7


def test_log_asymptotics():
    P = np.array([0, 0, 1.0])
    diffs = []
    for d in 10.0 ** -np.arange(2, 9):
        Q = np.array([math.sin(d), 0.0, math.cos(d)])
        diffs.append(green_round(P, Q) - 2 * math.log(d) / (4 * math.pi))
    diffs = np.array(diffs)
    assert np.all(np.isfinite(diffs))
    assert np.max(np.abs(np.diff(diffs))) < 1e-4


def test_diagonal_rejected():
    with pytest.raises(ArgumentError):
        green_round(np.array([0, 0, 1.0]), np.array([0, 0, 1.0]))


def test_zero_mean_single_pole():
    D = Divisor(((0.3, -0.2, 0.9),), (1,))
    assert abs(multipole(D).integral()) < 1e-9


def test_weak_form():
    g = make_grid(24)
    rng = np.random.default_rng(2)
    D = Divisor(tuple(map(tuple, rng.standard_normal((3, 3)))), (1, 2, 1))
    G = multipole(D)
    for seed in range(3):
        r = np.random.default_rng(seed)
        a = r.standard_normal(3)
        psi = ScalarField.from_function(g, lambda p: np.exp(0.5 * p @ a) + p[..., 0] * p[..., 2])
        assert abs(G.weak_laplacian_defect(psi)) < 1e-6


def fd_laplacian(fn, theta, lon, h=1e-3):
    """Positive g0-Laplacian by centred differences, Richardson-extrapolated."""

    def lap(h):
        f0 = fn(theta, lon)
        ft = (fn(theta + h, lon) - 2 * f0 + fn(theta - h, lon)) / h**2
        dt = (fn(theta + h, lon) - fn(theta - h, lon)) / (2 * h)
        fl = (fn(theta, lon + h) - 2 * f0 + fn(theta, lon - h)) / h**2
        unit_lap = ft + dt / np.tan(theta) + fl / np.sin(theta) ** 2
        return -2.0 * unit_lap

    return (4 * lap(h / 2) - lap(h)) / 3


def test_strong_equation_away_from_poles():
    D = equatorial(3)
    G = multipole(D)

    def fn(t, l):
        return G(np.stack([np.sin(t) * np.cos(l), np.sin(t) * np.sin(l), np.cos(t)], axis=-1))

    rng = np.random.default_rng(4)
    t = np.arccos(rng.uniform(-0.95, 0.95, 400))
    l = rng.uniform(0, 2 * math.pi, 400)
    pts = np.stack([np.sin(t) * np.cos(l), np.sin(t) * np.sin(l), np.cos(t)], axis=-1)
    far = np.min(np.arccos(np.clip(pts @ D.vectors.T, -1, 1)), axis=1) > 0.2
    vals = fd_laplacian(fn, t[far], l[far])
    assert np.max(np.abs(vals - D.N / (2 * math.pi))) < 1e-6


def test_antipodal_multipole_is_zonal():
    g = make_grid(32)
    G = multipole(antipodal((1, 1)))
    vals = G(g.points())
    assert np.max(np.ptp(vals, axis=1)) < 1e-10


def bumpy_phi(g):
    phi = ScalarField.from_function(g, lambda p: 0.2 * p[..., 2] * p[..., 0] + 0.1 * p[..., 1] + 0.05 * p[..., 2] ** 3)
    nu = quadrature(ScalarField.constant(g, 1.0), weight=phi)
    return phi - math.log(nu / (2 * math.pi))


def test_conformal_shift_identity():
    g = make_grid(24)
    lam = kahler_potential(ScalarField.constant(g, 0.0))
    assert np.max(np.abs(lam.values)) < 1e-14
    S = conformal_shift(multipole(equatorial(3)), lam, 2 * math.pi)
    rng = np.random.default_rng(5)
    P, Q = unit(rng.standard_normal((50, 3))), unit(rng.standard_normal((50, 3)))
    assert np.max(np.abs(S.kernel(P, Q) - green_round(P, Q))) < 1e-14


def test_conformal_shift_zero_mean_and_sup():
    g = make_grid(24)
    D = equatorial(3)
    lam = kahler_potential(bumpy_phi(g))
    S = conformal_shift(multipole(D), lam, 2 * math.pi)
    for j in range(len(D)):
        assert abs(S.integral(j)) < 1e-8
    rng = np.random.default_rng(6)
    P, Q = unit(rng.standard_normal((4000, 3))), unit(rng.standard_normal((4000, 3)))
    # antipodal pairs, where the round kernel peaks
    P, Q = np.concatenate([P, -Q[:200]]), np.concatenate([Q, Q[:200]])
    assert np.max(S.kernel(P, Q)) <= S.sup_bound() + 1e-12


def test_conformal_shift_rejects_unnormalized():
    g = make_grid(16)
    with pytest.raises(ArgumentError):
        conformal_shift(multipole(antipodal()), ScalarField.constant(g, 0.1), 2 * math.pi)
