"""Abelian vortex equation on a fixed conformal metric.

With ``Phi = exp(v + 4 pi G0)`` the vortex equation becomes the smooth
problem

    Delta_g0 v = e^phi (tau - Phi) - 2N,

whose linearization ``Delta_g0 + e^phi Phi`` is symmetric positive definite.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .config import SolverConfig
from .errors import InfeasibleError, NumericalError
from .green import multipole
from .sphere_spectral import (
    ScalarField,
    make_grid,
    pack,
    packed_degrees,
    packed_size,
    quadrature,
    unpack,
)


@lru_cache(maxsize=32)
def divisor_polynomial(L, D):
    """``exp(4 pi G0)`` at the oversampled nodes of the degree-``L`` grid."""
    return multipole(D).exp4pi(make_grid(L).fine.points())


def packed_laplacian(L):
    d = packed_degrees(L)
    return 2.0 * d * (d + 1.0)


def conformal_volume(phi):
    return quadrature(ScalarField.constant(phi.grid, 1.0), weight=phi)


def check_threshold(phi, N, tau):
    """Raise :class:`InfeasibleError` unless ``tau * nu > 4 pi N``."""
    nu = conformal_volume(phi)
    if tau * nu <= 4.0 * math.pi * N * (1.0 + 1e-14):
        raise InfeasibleError(
            f"vortex threshold fails: tau * Vol / 2pi = {tau * nu / (2 * math.pi):.6g} <= 2N = {2 * N}"
        )
    return nu


@dataclass
class VortexSolution:
    """Converged regular part ``v`` of ``log Phi`` on the metric ``e^phi g0``."""

    v: ScalarField
    divisor: object
    tau: float
    phi_conf: ScalarField
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def residual(self):
        return self.history[-1] if self.history else float("nan")


def _vortex_residual(vp, ephi, poly, D, tau, L):
    fine = make_grid(L).fine
    v = fine.synthesize(unpack(vp, L))
    Phi = np.exp(v) * poly
    r = packed_laplacian(L) * vp - pack(fine.analyze(ephi * (tau - Phi), L))
    r[0] += 2.0 * D.N * math.sqrt(4.0 * math.pi)
    return r, Phi


def _sup(packed, L):
    return float(np.max(np.abs(make_grid(L).fine.synthesize(unpack(packed, L)))))


def solve_vortex(phi_conf, D, tau, cfg=None, v0=None):
    """Solve the vortex equation for ``v`` on the metric ``e^phi_conf g0``.

    Parameters
    ----------
    phi_conf : ScalarField
        Conformal factor of the fixed metric.
    D : Divisor
    tau : float
    cfg : SolverConfig, optional
    v0 : ScalarField, optional
        Initial guess; by default the constant satisfying the mass identity.

    Returns
    -------
    VortexSolution

    Raises
    ------
    InfeasibleError
        If ``tau * Vol / 2pi <= 2N``.
    NumericalError
        If the damped Newton iteration stagnates.
    """
    cfg = cfg or SolverConfig(L=phi_conf.L)
    grid = phi_conf.grid
    L = grid.L
    nu = check_threshold(phi_conf, D.N, tau)
    poly = divisor_polynomial(L, D)
    fine = grid.fine
    ephi = np.exp(fine.synthesize(phi_conf.coeffs))
    if v0 is None:
        mass = tau * nu - 4.0 * math.pi * D.N
        c0 = math.log(mass / fine.integrate(ephi * poly))
        vp = np.zeros(packed_size(L))
        vp[0] = c0 * math.sqrt(4.0 * math.pi)
    else:
        vp = v0.packed() if v0.L == L else ScalarField(grid, coeffs=v0.coeffs).packed()

    lap = packed_laplacian(L)
    r, Phi = _vortex_residual(vp, ephi, poly, D, tau, L)
    norm = _sup(r, L)
    history = [norm]
    it = 0
    while norm > cfg.newton_tol:
        if it >= cfg.max_iter:
            raise NumericalError("vortex Newton iteration did not converge", history=history)
        it += 1
        w = ephi * Phi
        mean_w = fine.integrate(w) / (2.0 * math.pi)

        def matvec(x, w=w):
            return lap * x + pack(fine.analyze(w * fine.synthesize(unpack(x, L)), L))

        n = packed_size(L)
        A = LinearOperator((n, n), matvec=matvec, dtype=float)
        M = LinearOperator((n, n), matvec=lambda x: x / (lap + mean_w), dtype=float)
        dv, info = cg(A, -r, rtol=cfg.linear_tol, atol=0.0, maxiter=cfg.max_linear_iter, M=M)
        if info < 0:
            raise NumericalError("vortex linear solve failed", history=history)
        t = 1.0
        while True:
            r_new, Phi_new = _vortex_residual(vp + t * dv, ephi, poly, D, tau, L)
            norm_new = _sup(r_new, L)
            if norm_new < norm:
                break
            t *= 0.5
            if t < cfg.min_damping:
                if norm < 10.0 * cfg.newton_tol:
                    # roundoff floor just above the target
                    norm_new = norm
                    break
                raise NumericalError("vortex line search stagnated", history=history)
        if norm_new == norm:
            break
        vp = vp + t * dv
        r, Phi, norm = r_new, Phi_new, norm_new
        history.append(norm)
    return VortexSolution(ScalarField(grid, coeffs=unpack(vp, L)), D, float(tau), phi_conf, it, history)


def state_values(v, D, points=None):
    """``Phi`` at the nodes of ``v``'s grid (or at ``points``); exact zeros on the divisor."""
    if points is None:
        points = v.grid.points()
        ev = v.values
    else:
        ev = v.evaluate(points)
    return np.exp(ev) * multipole(D).exp4pi(points)


def state_function(sol):
    """``Phi = exp(v + 4 pi G0)`` as a ScalarField."""
    return ScalarField(sol.v.grid, values=state_values(sol.v, sol.divisor))
