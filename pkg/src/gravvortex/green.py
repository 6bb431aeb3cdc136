"""Green's functions of the round Laplacian and their multipole sums.

On the area-2pi round sphere the zero-mean Green's function of the positive
Laplacian, ``Delta_g0 G(., Q) = 1/(2 pi) - delta_Q``, has the closed form

    G(P, Q) = (log(1 - P.Q) + 1 - log 2) / (4 pi),

so ``exp(4 pi G(., Q)) = e (1 - P.Q) / 2`` is a polynomial in the ambient
coordinates.  The multipole ``G0 = sum_j n_j G(., p_j)`` therefore gives a
state function ``Phi = e^v prod_j (e w_j / 2)^{n_j}``, ``w_j = 1 - x.p_j``,
with exact zeros at the divisor and no cancellation anywhere.
"""

import math

import numpy as np

from .errors import ArgumentError
from .sphere_spectral import ScalarField, evaluate_at, laplacian_eigenvalues, quadrature

FOUR_PI = 4.0 * math.pi
_LOG_OFFSET = 1.0 - math.log(2.0)


def green_round(P, Q):
    """Zero-mean Green's function of the area-2pi round sphere.

    Logarithmic singularity ``(1/4pi) log dist^2`` at ``P = Q``; raises
    :class:`ArgumentError` when the points are closer than ``1e-12``.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d2 = np.sum((P - Q) ** 2, axis=-1)
    if np.any(d2 < 1e-24):
        raise ArgumentError("Green's function evaluated on the diagonal")
    # 1 - P.Q = |P - Q|^2 / 2 avoids cancellation for nearby points
    return (np.log(0.5 * d2) + _LOG_OFFSET) / FOUR_PI


def _frame(p):
    p = np.asarray(p, dtype=float)
    a = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - np.dot(a, p) * p
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return e1, e2


def polar_quadrature(p, n_s=96, n_lon=64, power=4):
    """Nodes ``(points, weights, s)`` for integrals with a log singularity at ``p``.

    ``s = 1 - x.p`` is mapped as ``s = 2 u^power`` with Gauss-Legendre in ``u``,
    so ``int g(x) log(s) vol_g0`` converges spectrally for smooth ``g``.
    """
    u, wu = np.polynomial.legendre.leggauss(n_s)
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    s = 2.0 * u**power
    ds = 2.0 * power * u ** (power - 1) * wu
    cos_t = 1.0 - s
    sin_t = np.sqrt(np.clip(s * (2.0 - s), 0.0, None))
    lon = 2.0 * math.pi * np.arange(n_lon) / n_lon
    e1, e2 = _frame(p)
    pts = (
        sin_t[:, None, None] * (np.cos(lon)[None, :, None] * e1 + np.sin(lon)[None, :, None] * e2)
        + cos_t[:, None, None] * np.asarray(p)[None, None, :]
    )
    # vol_g0 = (1/2) sin t dt dlon = (1/2) ds dlon
    w = 0.5 * ds[:, None] * np.full(n_lon, 2.0 * math.pi / n_lon)[None, :]
    return pts, w, np.broadcast_to(s[:, None], w.shape)


def _as_evaluator(f):
    if f is None:
        return lambda pts: np.ones(pts.shape[:-1])
    if isinstance(f, ScalarField):
        return lambda pts: evaluate_at(f.coeffs, pts)
    return f


class GreenMultipole:
    """``G0 = sum_j n_j G(., p_j)`` for a divisor, with analytic singular parts."""

    def __init__(self, divisor):
        self.divisor = divisor
        self.poles = divisor.vectors
        self.mults = np.array(divisor.mults, dtype=int)
        self.N = divisor.N

    def chord_factors(self, points):
        """``w_j = 1 - x.p_j`` for each pole, shape ``(k, ...)``; computed as ``|x-p|^2/2``."""
        pts = np.asarray(points, dtype=float)
        return np.stack([0.5 * np.sum((pts - p) ** 2, axis=-1) for p in self.poles])

    def __call__(self, points):
        """``G0`` at ``points`` (``-inf`` exactly at the poles)."""
        w = self.chord_factors(points)
        with np.errstate(divide="ignore"):
            logs = np.log(w) + _LOG_OFFSET
        return np.tensordot(self.mults, logs, axes=1) / FOUR_PI

    def exp4pi(self, points, drop=None):
        """``exp(4 pi G0)`` as the polynomial ``prod_j (e w_j/2)^{n_j}``.

        ``drop`` lowers the exponent of listed pole indices by one each (for
        the removable quotients ``Phi / w_j`` needed in gradient densities).
        """
        w = self.chord_factors(points)
        out = np.ones(w.shape[1:])
        exps = self.mults.copy()
        extra = 1.0
        if drop is not None:
            for j in drop:
                exps[j] -= 1
                extra *= math.e / 2.0
        for j, n in enumerate(exps):
            if n < 0:
                raise ArgumentError("cannot drop a pole more often than its multiplicity")
            out = out * (0.5 * math.e * w[j]) ** n
        return out * extra

    def log_gradients(self, points):
        """Ambient gradients (unit-sphere metric) of ``w_j``, shape ``(k, ..., 3)``."""
        pts = np.asarray(points, dtype=float)
        out = []
        for p in self.poles:
            xp = np.sum(pts * p, axis=-1)[..., None]
            out.append(-(p - xp * pts))
        return np.stack(out)

    def grid_values(self, grid):
        return self(grid.points())

    def integral(self, weight=None, n_s=96, n_lon=None):
        """``int f G0 vol_g0`` for a smooth ``f`` (``None`` means ``f = 1``).

        ``weight`` may be a ScalarField or a callable on unit vectors.
        """
        f = _as_evaluator(weight)
        if n_lon is None:
            n_lon = 2 * (weight.L + 2) if isinstance(weight, ScalarField) else 64
        total = 0.0
        for n, p in zip(self.mults, self.poles):
            pts, w, s = polar_quadrature(p, n_s=n_s, n_lon=n_lon)
            total += n * np.sum(w * f(pts) * (np.log(s) + _LOG_OFFSET)) / FOUR_PI
        return float(total)

    def weak_laplacian_defect(self, psi):
        """``int G0 Delta_g0 psi - (N/2pi) int psi + sum_j n_j psi(p_j)`` (zero for the exact G0)."""
        lap = ScalarField(psi.grid, coeffs=psi.coeffs * laplacian_eigenvalues(psi.grid.L))
        lhs = self.integral(lap)
        rhs = self.N / (2.0 * math.pi) * quadrature(psi) - float(np.dot(self.mults, psi.evaluate(self.poles)))
        return lhs - rhs


def multipole(D):
    return GreenMultipole(D)


def kahler_potential(phi, nu=2.0 * math.pi, tol=1e-8):
    """Potential ``lam`` with ``e^phi omega0 = omega0 + dd^c lam``, normalized by ``int lam (omega + omega0) = 0``.

    With ``dd^c = 2 i d d-bar`` this reads ``Delta_g0 lam = 1 - e^phi``.
    """
    e = ScalarField(phi.grid, coeffs=phi.grid.fine.analyze(np.exp(phi.fine_values()), phi.grid.L))
    rhs = 1.0 - e
    mean = quadrature(rhs) / nu
    if abs(mean) > tol:
        raise ArgumentError(f"conformal factor changes the volume (mean defect {mean:.3e})")
    eig = laplacian_eigenvalues(phi.grid.L)
    c = np.where(eig > 0, rhs.coeffs / np.where(eig > 0, eig, 1.0), 0.0)
    lam = ScalarField(phi.grid, coeffs=c)
    dens = 1.0 + e
    shift = -quadrature(lam * dens) / quadrature(dens)
    return lam + shift


class ShiftedGreen:
    """Green's function of ``omega = omega0 + dd^c lam`` via the conformal-change formula."""

    def __init__(self, base, lam, nu):
        self.base = base
        self.lam = lam
        self.nu = float(nu)
        self.pole_lam = lam.evaluate(base.poles)

    def kernel(self, P, Q):
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        return green_round(P, Q) - (self.lam.evaluate(P) + self.lam.evaluate(Q)) / self.nu

    def __call__(self, points):
        """Multipole ``sum_j n_j G_omega(., p_j)``."""
        lam_p = self.lam.evaluate(points)
        return self.base(points) - (self.base.N * lam_p + float(np.dot(self.base.mults, self.pole_lam))) / self.nu

    def volume_density(self):
        """``omega / omega0 = 1 - Delta_g0 lam``."""
        return 1.0 - ScalarField(self.lam.grid, coeffs=self.lam.coeffs * laplacian_eigenvalues(self.lam.L))

    def integral(self, j=None):
        """``int G_omega(., p_j) omega`` (or of the multipole when ``j`` is None)."""
        dens = self.volume_density()
        if j is None:
            mults, poles = self.base.mults, self.base.poles
        else:
            mults, poles = [1], [self.base.poles[j]]
        total = 0.0
        for n, p in zip(mults, poles):
            single = GreenMultipole.__new__(GreenMultipole)
            single.poles = np.array([p])
            single.mults = np.array([1])
            single.N = 1
            g_part = single.integral(dens)
            lam_p = float(self.lam.evaluate(np.asarray(p)[None, :])[0])
            lam_int = quadrature(self.lam * dens)
            total += n * (g_part - (lam_int + lam_p * quadrature(dens)) / self.nu)
        return total

    def sup_bound(self):
        """``sup G_omega0 + (2/nu) sup(-lam)``; the kernel never exceeds it."""
        return 1.0 / FOUR_PI + 2.0 / self.nu * float(np.max(-self.lam.values))


def conformal_shift(base, lam, nu, tol=1e-8):
    """Green's function for ``omega0 + dd^c lam``; requires ``int lam (omega + omega0) = 0``."""
    dens = 2.0 - ScalarField(lam.grid, coeffs=lam.coeffs * laplacian_eigenvalues(lam.L))
    defect = quadrature(lam * dens)
    if abs(defect) > tol:
        raise ArgumentError(f"potential is not normalized: int lam (omega + omega0) = {defect:.3e}")
    return ShiftedGreen(base, lam, nu)
