"""Futaki obstruction and extremal pairs for two-point divisors.

Everything here is zonal.  The divisor is ``ell`` times the north pole plus
``N - ell`` times the south pole, and a pair ``(omega, h)`` is encoded by two
functions of ``x = cos theta``:

* ``phi`` with ``omega = e^phi omega0`` (``omega0`` round, area ``2 pi``),
* ``f`` with ``|phi|_h^2 = Q = e^{2f} p^ell (1 - p)^{N - ell}``, ``p = (1 - x)/2``.

With these, ``i Lambda F_h = e^{-phi} (N + Delta0 f)`` and the moment map of
the rotation is ``mu(x) = (1/2) int_x^1 e^phi``, which runs from 0 at the
north pole to 1 at the south pole.  The torus generator ``y`` acting by
``z -> lambda z`` has vertical part ``a = ell - N p - (1 - x^2) f'`` and
complex Hamiltonian potential ``i (mu - 1/2)``.  With the sign convention
used here its pairing with the Futaki character is
``i * 2 pi alpha (2N - tau)(2 ell - N)``.  All reported values are imaginary
parts unless stated otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev

from .errors import ArgumentError
from .sphere_spectral import gauss_legendre

N_QUAD = 256
DEG = 160


def futaki_closed(alpha, tau, N, ell):
    """Imaginary part of the Futaki character on the torus generator."""
    if int(N) != N or int(ell) != ell:
        raise ArgumentError("N and ell must be integers")
    if not 0 < ell < N:
        raise ArgumentError(f"need 0 < ell < N, got ell={ell}, N={N}")
    return 2.0 * math.pi * alpha * (2 * N - tau) * (2 * ell - N) + 0.0


def _interp(fn, deg=DEG, rel=1e-15):
    """Chebyshev interpolant of the lowest resolving degree, tail chopped.

    Doubles the degree from 8 until the trailing coefficients fall below
    ``rel`` of the largest, then drops everything past the last resolved
    term so that repeated differentiation does not amplify roundoff.
    """
    n = 8
    while True:
        c = Chebyshev.interpolate(fn, n).coef
        big = max(np.max(np.abs(c)), 1e-300)
        if np.max(np.abs(c[-max(2, n // 8) :])) <= rel * big or n >= deg:
            break
        n = min(2 * n, deg)
    keep = np.nonzero(np.abs(c) > rel * big)[0]
    return Chebyshev(c[: keep[-1] + 1 if keep.size else 1])


def _lap0(g):
    """Zonal round Laplacian of a Chebyshev series, as a callable."""
    d1, d2 = g.deriv(1), g.deriv(2)
    return lambda x: -2.0 * ((1.0 - x * x) * d2(x) - 2.0 * x * d1(x))


@dataclass
class ZonalPair:
    """A zonal pair ``(omega, h)`` on ``O(N)`` over the sphere.

    ``phi`` and ``f`` are Chebyshev series in ``x = cos theta``; ``phi`` is
    shifted on construction so that ``omega`` has area ``2 pi``.
    """

    N: int
    ell: int
    phi: Chebyshev
    f: Chebyshev
    label: str = "custom"

    def __post_init__(self):
        if int(self.N) != self.N or int(self.ell) != self.ell or not 0 <= self.ell <= self.N or self.N < 1:
            raise ArgumentError(f"need integers 0 <= ell <= N, N >= 1; got ell={self.ell}, N={self.N}")
        if not isinstance(self.phi, Chebyshev) or not isinstance(self.f, Chebyshev):
            raise ArgumentError("a zonal pair needs phi and f as Chebyshev series in cos(theta)")
        mass = self._exp_phi().integ(lbnd=-1)(1.0)
        self.phi = self.phi - math.log(mass / 2.0)

    @classmethod
    def from_functions(cls, N, ell, phi, f, label="custom", deg=DEG):
        """Build from callables of ``x``; constants are accepted."""
        wrap = lambda g: (lambda x: np.broadcast_to(np.asarray(g(x) if callable(g) else g, float), np.shape(x)))
        return cls(N, ell, _interp(wrap(phi), deg), _interp(wrap(f), deg), label)

    @classmethod
    def fubini_study(cls, N, ell):
        """Round metric with the Fubini-Study power ``h_FS^N``."""
        return cls.from_functions(N, ell, 0.0, 0.0, label="fubini-study", deg=2)

    @classmethod
    def random(cls, N, ell, seed=0, amplitude=0.3, modes=6):
        """Smooth random zonal perturbation of the Fubini-Study pair."""
        rng = np.random.default_rng(seed)
        cp = np.zeros(modes + 1)
        cf = np.zeros(modes + 1)
        cp[1:] = amplitude * rng.standard_normal(modes) / np.arange(1, modes + 1) ** 2
        cf[1:] = amplitude * rng.standard_normal(modes) / np.arange(1, modes + 1) ** 2
        return cls(N, ell, Chebyshev(cp), Chebyshev(cf), label=f"random(seed={seed})")

    @classmethod
    def from_state(cls, state, tol=1e-8, deg=96, rel=1e-13):
        """Recast a zonal :class:`SolutionState` with divisor at the poles as a pair.

        Grid data carry roundoff near ``1e-14``, so the meridian interpolants
        are chopped at ``rel`` rather than at machine precision.
        """
        from .axisym import pole_multiplicities

        n_north, n_south = pole_multiplicities(state.divisor)
        for name in ("phi", "v"):
            c = getattr(state, name).coeffs
            if np.max(np.abs(c[:, 1:])) > tol:
                raise ArgumentError(f"state field {name} is not zonal")

        def meridian(field):
            def fn(x):
                x = np.asarray(x, float)
                pts = np.stack([np.sqrt(np.clip(1 - x * x, 0, None)), np.zeros_like(x), x], axis=-1)
                return field.evaluate(pts).real

            return fn

        v = meridian(state.v)
        N = n_north + n_south
        return cls(
            N,
            n_north,
            _interp(meridian(state.phi), deg, rel),
            _interp(lambda x: 0.5 * (v(x) + N), deg, rel),
            label=f"state(alpha={state.alpha:.6g})",
        )

    def _exp_phi(self):
        phi = self.phi
        return _interp(lambda x: np.exp(phi(x)))

    def describe(self):
        return {"label": self.label, "N": int(self.N), "ell": int(self.ell)}

    def fields(self, x, alpha, tau):
        """Pointwise quantities of the pair at ``x``, as a dict."""
        x = np.asarray(x, float)
        N, ell = self.N, self.ell
        p = 0.5 * (1.0 - x)
        ephi = np.exp(self.phi(x))
        f = self.f
        Q = np.exp(2.0 * f(x)) * p**ell * (1.0 - p) ** (N - ell)
        Qs = _interp(lambda t: np.exp(2.0 * f(t)) * (0.5 * (1 - t)) ** ell * (0.5 * (1 + t)) ** (N - ell))
        S = (2.0 + 0.5 * _lap0(self.phi)(x)) / ephi
        lap_Q = _lap0(Qs)(x) / ephi
        curv = (N + _lap0(f)(x)) / ephi
        mu = -0.5 * self._exp_phi().integ(lbnd=1)(x)
        return {
            "p": p,
            "ephi": ephi,
            "Q": Q,
            "S": S,
            "lap_Q": lap_Q,
            "curvature": curv,
            "mu": mu,
            "F": S + alpha * lap_Q - 2.0 * alpha * tau * curv,
            "V": curv + 0.5 * Q - 0.5 * tau,
            "a": ell - N * p - (1.0 - x * x) * f.deriv()(x),
        }

    def hamiltonian(self, alpha, tau):
        """``F = S + alpha Delta Q - 2 alpha tau i Lambda F_h`` as a Chebyshev series."""
        return _interp(lambda x: self.fields(x, alpha, tau)["F"])


def _nodes():
    return gauss_legendre(N_QUAD)


def futaki_quadrature(alpha, tau, N, ell, pair=None):
    """Imaginary part of the Futaki character on ``y`` by quadrature over ``pair``.

    The first term pairs the vertical part of ``y`` with the vortex
    defect; the second pairs the normalized Hamiltonian potential with
    ``F``.  Both are one-dimensional integrals in ``x``.
    """
    pair = ZonalPair.fubini_study(N, ell) if pair is None else pair
    if not isinstance(pair, ZonalPair):
        raise ArgumentError("futaki quadrature needs a ZonalPair")
    if pair.N != N or pair.ell != ell:
        raise ArgumentError(f"pair is on (N, ell)=({pair.N}, {pair.ell}), not ({N}, {ell})")
    x, w = _nodes()
    q = pair.fields(x, alpha, tau)
    vol = math.pi * q["ephi"] * w  # omega = e^phi * pi dx
    # mu is uniform for omega, so mu - 1/2 already has zero mean
    phi_pot = q["mu"] - 0.5
    return float(4.0 * alpha * np.sum(q["a"] * q["V"] * vol) - np.sum(phi_pot * q["F"] * vol))


@dataclass
class FutakiResult:
    closed_form: float
    quadrature: float
    pair_descriptor: dict
    rel_diff: float

    def to_dict(self):
        return {
            "closed_form": self.closed_form,
            "quadrature": self.quadrature,
            "pair": self.pair_descriptor,
            "rel_diff": self.rel_diff,
            "convention": "imaginary part of <F, y>, y = diag(0, 1)",
        }


def futaki(alpha, tau, N, ell, pair=None):
    """Closed form and quadrature of the Futaki character, side by side."""
    pair = ZonalPair.fubini_study(N, ell) if pair is None else pair
    closed = futaki_closed(alpha, tau, N, ell)
    quad = futaki_quadrature(alpha, tau, N, ell, pair)
    return FutakiResult(closed, quad, pair.describe(), abs(closed - quad) / max(1.0, abs(closed)))


@dataclass
class ExtremalDefects:
    """Decomposition of the extremal residual of a pair."""

    holomorphy: float
    vertical: float
    slope: float  # mean dF/dmu; the extremal field is -i slope * y
    kappa: float  # constant vertical offset of zeta
    scale: float

    @property
    def total(self):
        return self.holomorphy + self.vertical


def extremal_defects(pair, alpha, tau, D=None):
    """Holomorphy and vertical-compatibility defects of ``zeta`` for ``pair``.

    The Hamiltonian field of ``F`` is Killing exactly when ``F`` is affine in
    ``mu``; its failure is measured by
    ``(2 pi int F_mumu^2 |d/dlon|^4 dmu)^(1/2)``.  The vertical part is
    compatible when ``V + F_mu a`` is constant, measured in ``L^2(omega)``
    modulo constants.
    """
    if not isinstance(pair, ZonalPair):
        pair = ZonalPair.from_state(pair)
    if D is not None:
        from .axisym import pole_multiplicities

        n_north, n_south = pole_multiplicities(D)
        if (n_north, n_north + n_south) != (pair.ell, pair.N):
            raise ArgumentError("divisor does not match the pair's (ell, N)")
    x, w = _nodes()
    q = pair.fields(x, alpha, tau)
    Fs = pair.hamiltonian(alpha, tau)
    e_phi = q["ephi"]
    F_mu_s = _interp(lambda t: -2.0 * np.exp(-pair.phi(t)) * Fs.deriv()(t))
    F_mu = F_mu_s(x)
    F_mumu = -2.0 / e_phi * F_mu_s.deriv()(x)
    psi = 0.5 * e_phi * (1.0 - x * x)
    dmu = 0.5 * e_phi * w
    hol = math.sqrt(2.0 * math.pi * np.sum(F_mumu**2 * psi**2 * dmu))
    vol = math.pi * e_phi * w
    W = q["V"] + F_mu * q["a"]
    kappa = float(np.sum(W * vol) / (2.0 * math.pi))
    vert = math.sqrt(np.sum((W - kappa) ** 2 * vol))
    slope = float(np.sum(F_mu * vol) / (2.0 * math.pi))
    scale = 1.0 + float(np.max(np.abs(q["F"])) + np.max(np.abs(q["V"])))
    return ExtremalDefects(hol, vert, slope, kappa, scale)


def extremal_residual(pair, alpha, tau, D=None):
    """Sum of the holomorphy and vertical defects; zero iff ``pair`` is extremal."""
    return extremal_defects(pair, alpha, tau, D).total


def zeta_pairing(pair, alpha, tau):
    """``<F, zeta>`` for ``zeta = zeta(pair)``, evaluated directly.

    The vertical part of ``zeta`` is ``i V`` and its potential is
    ``F - mean F``, so the pairing reduces to
    ``-4 alpha int V^2 omega - int (F - mean F)^2 omega``.
    """
    x, w = _nodes()
    q = pair.fields(x, alpha, tau)
    vol = math.pi * q["ephi"] * w
    F = q["F"]
    Fc = F - np.sum(F * vol) / (2.0 * math.pi)
    return float(-4.0 * alpha * np.sum(q["V"] ** 2 * vol) - np.sum(Fc**2 * vol))


def zeta_pairing_character(pair, alpha, tau):
    """``<F, zeta>`` for an extremal pair through the character property.

    Writing ``zeta = -i F_mu y + i kappa 1`` gives
    ``F_mu Im<F, y> - 4 alpha kappa int V omega``; only meaningful when
    the pair is extremal.
    """
    d = extremal_defects(pair, alpha, tau)
    x, w = _nodes()
    q = pair.fields(x, alpha, tau)
    vol = math.pi * q["ephi"] * w
    im_y = futaki_quadrature(alpha, tau, pair.N, pair.ell, pair)
    return float(d.slope * im_y - 4.0 * alpha * d.kappa * np.sum(q["V"] * vol))
