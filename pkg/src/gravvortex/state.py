"""Solution states of the coupled system and the fields derived from them.

A state is the pair ``(phi, v)``: the metric is ``g = e^phi g0`` and the
state function is ``Phi = exp(v + 4 pi G0)``.  Everything else (curvature,
the gradient density ``b = |grad Phi|^2_g / Phi``, the conformal metric
``k = e^{2 alpha Phi} g``) is computed on demand.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .green import multipole
from .sphere_spectral import ScalarField, laplacian0, quadrature


def topological_constant(alpha, tau, N):
    """``c = 2 - 2 alpha tau N`` for total volume 2pi."""
    return 2.0 - 2.0 * alpha * tau * N


def alpha_max(tau, N):
    return 1.0 / (tau * N)


def ambient_gradient(f, grid=None):
    """Gradient of ``f`` at the nodes of ``grid`` as 3-vectors in the unit-sphere metric."""
    grid = grid or f.grid
    f_t, f_l = grid.gradient(f.coeffs)
    ct = grid.x[:, None]
    st = grid.sin_theta[:, None]
    cl, sl = np.cos(grid.lon)[None, :], np.sin(grid.lon)[None, :]
    e_t = np.stack([ct * cl, ct * sl, -st * np.ones_like(cl)], axis=-1)
    e_l = np.stack([-sl * np.ones_like(ct), cl * np.ones_like(ct), np.zeros((grid.n_lat, grid.n_lon))], axis=-1)
    return f_t[..., None] * e_t + f_l[..., None] * e_l


def gradient_density_values(v, D, grid=None):
    """``Phi |grad log Phi|^2_g0`` at the nodes of ``grid`` without 0/0 quotients.

    Expands ``|grad v + sum_j n_j grad w_j / w_j|^2`` and cancels every
    ``1/w_j`` against the polynomial factor of ``Phi``.
    """
    grid = grid or v.grid
    G = multipole(D)
    pts = grid.points()
    gv = ambient_gradient(v, grid)
    ev = np.exp(grid.synthesize(v.coeffs))
    gw = G.log_gradients(pts)
    w = G.chord_factors(pts)
    n = G.mults
    k = len(n)
    total = G.exp4pi(pts) * np.sum(gv * gv, axis=-1)
    for j in range(k):
        pj = G.exp4pi(pts, drop=[j])
        total += 2.0 * n[j] * pj * np.sum(gv * gw[j], axis=-1)
        # |grad w_j|^2 = w_j (2 - w_j) in the unit metric
        total += n[j] * n[j] * pj * (2.0 - w[j])
        for i in range(j + 1, k):
            total += 2.0 * n[i] * n[j] * G.exp4pi(pts, drop=[i, j]) * np.sum(gw[i] * gw[j], axis=-1)
    # g0 = g_unit / 2
    return 2.0 * ev * total


@dataclass
class SolutionState:
    """Conformal factor ``phi`` and regular part ``v`` at coupling ``alpha``.

    Attributes
    ----------
    phi, v : ScalarField
        Unknowns on a common grid.
    alpha, tau : float
    divisor : Divisor
    converged : bool
        Set by the solvers once both residuals are below tolerance.
    residual_norms : tuple
        Sup norms ``(|R1|, |R2|)`` at the last evaluation.
    """

    phi: ScalarField
    v: ScalarField
    alpha: float
    tau: float
    divisor: object
    converged: bool = False
    residual_norms: tuple = (float("nan"), float("nan"))
    iterations: int = 0
    sigma_min: float = None
    history: list = field(default_factory=list)

    @property
    def grid(self):
        return self.phi.grid

    @property
    def L(self):
        return self.phi.grid.L

    @property
    def N(self):
        return self.divisor.N

    @property
    def c(self):
        return topological_constant(self.alpha, self.tau, self.N)

    def volume(self):
        """``nu = int e^phi vol_g0``."""
        return quadrature(ScalarField.constant(self.grid, 1.0), weight=self.phi)

    def Phi_values(self, grid=None):
        grid = grid or self.grid
        pts = grid.points()
        return np.exp(grid.synthesize(self.v.coeffs)) * multipole(self.divisor).exp4pi(pts)

    def Phi(self):
        return ScalarField(self.grid, values=self.Phi_values())

    def Phi_fine(self):
        """``Phi`` projected to degree ``L`` through the oversampled grid."""
        fine = self.grid.fine
        return ScalarField(self.grid, coeffs=fine.analyze(self.Phi_values(fine), self.L))

    def scalar_curvature_values(self, grid=None):
        """``S_g = e^{-phi} (2 + Delta_g0 phi / 2)`` at the nodes."""
        grid = grid or self.grid
        lap = laplacian0(self.phi)
        return np.exp(-grid.synthesize(self.phi.coeffs)) * (2.0 + 0.5 * grid.synthesize(lap.coeffs))

    def eta_density_values(self, grid=None):
        return -0.5 * (self.Phi_values(grid) - self.tau)

    def b_values(self, grid=None):
        """``b = |grad Phi|^2_g / Phi`` at the nodes (finite at the divisor)."""
        grid = grid or self.grid
        return np.exp(-grid.synthesize(self.phi.coeffs)) * gradient_density_values(self.v, self.divisor, grid)

    def mass(self):
        """``(1/2pi) int Phi vol_g``."""
        fine = self.grid.fine
        vals = self.Phi_values(fine) * np.exp(fine.synthesize(self.phi.coeffs))
        return fine.integrate(vals) / (2.0 * math.pi)

    def copy_with(self, **kw):
        d = dict(
            phi=self.phi,
            v=self.v,
            alpha=self.alpha,
            tau=self.tau,
            divisor=self.divisor,
            converged=self.converged,
            residual_norms=self.residual_norms,
            iterations=self.iterations,
            sigma_min=self.sigma_min,
            history=list(self.history),
        )
        d.update(kw)
        return SolutionState(**d)
