"""Zonal reduction of the coupled system for divisors supported at the poles.

For fields depending only on ``x = cos theta`` the round Laplacian is the
Legendre operator ``Delta_g0 = -2 ((1 - x^2) d^2/dx^2 - 2 x d/dx)``, which
degenerates at ``x = +-1``; collocation at Chebyshev-Gauss-Lobatto nodes
therefore needs no boundary conditions (regularity is built in).
"""

import math

import numpy as np

from .errors import ArgumentError, NumericalError
from .sphere_spectral import ScalarField, make_grid
from .state import SolutionState, topological_constant


def cheb(n):
    """Chebyshev-Gauss-Lobatto nodes ``x_j = cos(pi j / n)`` and differentiation matrix."""
    if n == 0:
        return np.array([1.0]), np.zeros((1, 1))
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def legendre_operator(x, D):
    """Collocation matrix of the zonal round Laplacian ``Delta_g0``."""
    return -2.0 * ((1.0 - x * x)[:, None] * (D @ D) - 2.0 * x[:, None] * D)


def pole_multiplicities(D):
    """``(n_north, n_south)`` for a divisor supported at the poles."""
    n_north = n_south = 0
    for p, n in zip(D.vectors, D.mults):
        if abs(p[2] - 1.0) < 1e-12:
            n_north += n
        elif abs(p[2] + 1.0) < 1e-12:
            n_south += n
        else:
            raise ArgumentError("axisymmetric reduction needs a divisor supported at the poles")
    return n_north, n_south


def chop(coeffs, rel=1e-12):
    """Zero the tail of a Chebyshev series once it stays below ``rel`` times its largest term.

    Collocated values carry roundoff of order ``n^4 eps``; left in place it
    interpolates to a flat coefficient plateau that high-degree Laplacians
    amplify.
    """
    c = np.array(coeffs, dtype=float)
    big = np.nonzero(np.abs(c) > rel * max(np.max(np.abs(c)), 1e-300))[0]
    c[big[-1] + 1 if big.size else 1 :] = 0.0
    return c


class ZonalProfile:
    """Collocated zonal solution ``(phi, v)`` with interpolation to arbitrary ``x``."""

    def __init__(self, x, phi, v, n_north, n_south):
        self.x = x
        self.phi = phi
        self.v = v
        self.n_north = n_north
        self.n_south = n_south
        n = x.size - 1
        self._cphi = chop(np.polynomial.chebyshev.chebfit(x, phi, n))
        self._cv = chop(np.polynomial.chebyshev.chebfit(x, v, n))

    def phi_at(self, x):
        return np.polynomial.chebyshev.chebval(x, self._cphi)

    def v_at(self, x):
        return np.polynomial.chebyshev.chebval(x, self._cv)

    def Phi_at(self, x):
        return np.exp(self.v_at(x)) * _pole_poly(x, self.n_north, self.n_south)


def _pole_poly(x, nn, ns):
    return (0.5 * math.e * (1.0 - x)) ** nn * (0.5 * math.e * (1.0 + x)) ** ns


def axisym_profile(D, tau, alpha, n_nodes=64, tol=1e-12, max_iter=40, rcond=1e-8):
    """Newton-collocation solve of the zonal system; returns a :class:`ZonalProfile`.

    Steps are truncated least-squares solutions of the Jacobian right-scaled
    by ``(Delta + 1)^-1`` in each block, so directions with relative singular
    value below ``rcond`` (the dilation of a two-pole divisor) are dropped.
    With equal multiplicities the steps are also symmetrized under
    ``x -> -x``.
    """
    nn, ns = pole_multiplicities(D)
    N = nn + ns
    c = topological_constant(alpha, tau, N)
    x, Dx = cheb(n_nodes)
    Lap = legendre_operator(x, Dx)
    m = x.size
    Pi = _pole_poly(x, nn, ns)
    P = np.linalg.inv(Lap + np.eye(m))
    scale = np.block([[P, np.zeros((m, m))], [np.zeros((m, m)), P]])
    mean_pi = 0.5 * np.sum(Pi * _cc_weights(n_nodes))
    v = np.full(m, math.log((tau - 2 * N) / mean_pi))
    phi = np.zeros(m)

    def resid(v, phi):
        e = np.exp(phi)
        Phi = np.exp(v) * Pi
        r1 = Lap @ v - e * (tau - Phi) + 2 * N
        r2 = 2.0 + 0.5 * Lap @ phi + alpha * (Lap @ (Phi - tau) + tau * e * (Phi - tau)) - c * e
        return np.concatenate([r1, r2]), e, Phi

    r, e, Phi = resid(v, phi)
    norm = np.max(np.abs(r))
    history = [norm]
    for _ in range(max_iter):
        if norm < tol:
            break
        J = np.block(
            [
                [Lap + np.diag(e * Phi), -np.diag(e * (tau - Phi))],
                [
                    alpha * Lap @ np.diag(Phi) + np.diag(alpha * tau * e * Phi),
                    0.5 * Lap + np.diag(alpha * tau * e * (Phi - tau) - c * e),
                ],
            ]
        )
        y = np.linalg.lstsq(J @ scale, -r, rcond=rcond)[0]
        d = scale @ y
        if nn == ns:
            # nodes are symmetric under x -> -x; keep the even slice
            d = 0.5 * (d + np.concatenate([d[:m][::-1], d[m:][::-1]]))
        t = 1.0
        while True:
            r_new, e_new, Phi_new = resid(v + t * d[:m], phi + t * d[m:])
            norm_new = np.max(np.abs(r_new))
            if norm_new < norm:
                break
            t *= 0.5
            if t < 1e-4:
                if norm < 1e3 * tol:
                    norm_new = norm
                    break
                raise NumericalError("zonal Newton iteration stagnated", history=history)
        if norm_new == norm:
            break
        v, phi = v + t * d[:m], phi + t * d[m:]
        r, e, Phi, norm = r_new, e_new, Phi_new, norm_new
        history.append(norm)
    else:
        if norm >= tol:
            raise NumericalError("zonal Newton iteration did not converge", history=history)
    prof = ZonalProfile(x, phi, v, nn, ns)
    prof.history = history
    return prof


def _cc_weights(n):
    """Clenshaw-Curtis weights on ``cos(pi j / n)``, summing to 2."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    return w


def axisym_solve(D, tau, alpha, n_nodes=64, L=64, tol=1e-12, max_iter=40):
    """Zonal solve lifted to the degree-``L`` grid as a :class:`SolutionState`."""
    prof = axisym_profile(D, tau, alpha, n_nodes=n_nodes, tol=tol, max_iter=max_iter)
    grid = make_grid(L)
    fine = grid.fine
    xs = fine.x
    phi_vals = np.repeat(prof.phi_at(xs)[:, None], fine.n_lon, axis=1)
    v_vals = np.repeat(prof.v_at(xs)[:, None], fine.n_lon, axis=1)
    phi = ScalarField(grid, coeffs=fine.analyze(phi_vals, L))
    v = ScalarField(grid, coeffs=fine.analyze(v_vals, L))
    state = SolutionState(phi, v, float(alpha), float(tau), D, converged=True)
    state.profile = prof
    return state
