"""Coupled Newton solver in conformal gauge and continuation in alpha.

Unknowns are the packed harmonic coefficients of ``v`` and ``phi``.  The
residuals are Galerkin projections (products on the 3/2-oversampled grid)
of

    R1 = Delta v - e^phi (tau - Phi) + 2N
    R2 = 2 + Delta phi / 2 + alpha (Delta + tau e^phi)(Phi - tau) - c e^phi

with ``Delta = Delta_g0`` and ``c = 2 - 2 alpha tau N``.  Newton steps are
solved with GMRES after the substitution ``psi = phi/2 + alpha Phi``, which
turns both principal parts into plain Laplacians, and a diagonal
``(Delta + 1)^-1`` scaling; the preconditioned operator is then identity
plus compact.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .config import SolverConfig
from .divisor import classify, is_admissible, is_reflection_symmetric
from .errors import ArgumentError, NumericalError
from .sphere_spectral import ScalarField, make_grid, pack, packed_degrees, packed_orders, packed_size, unpack
from .state import SolutionState, alpha_max, topological_constant
from .vortex import divisor_polynomial, packed_laplacian, solve_vortex

__all__ = [
    "SolverConfig",
    "SolutionState",
    "ContinuationReport",
    "residual",
    "jacobian",
    "initial_state",
    "solve_at_alpha",
    "continue_path",
    "axisym_solve",
]


class _Problem:
    """Fixed data of one ``(alpha, tau, D, L)`` problem plus grid-level kernels."""

    def __init__(self, alpha, tau, D, L):
        self.alpha = float(alpha)
        self.tau = float(tau)
        self.D = D
        self.L = L
        self.grid = make_grid(L)
        self.fine = self.grid.fine
        self.n = packed_size(L)
        self.lap = packed_laplacian(L)
        self.poly = divisor_polynomial(L, D)
        self.c = topological_constant(alpha, tau, D.N)
        # reflection-invariant data: stay in the even slice, where the
        # Moebius dilation kernel of two-pole divisors is absent
        self.mask = None
        if is_reflection_symmetric(D):
            deg = packed_degrees(L)
            order = packed_orders(L)
            even = ((deg + order) % 2 == 0).astype(float)
            self.mask = np.concatenate([even, even])

    def restrict(self, x):
        return x if self.mask is None else x * self.mask

    def syn(self, p):
        return self.fine.synthesize(unpack(p, self.L))

    def proj(self, vals):
        return pack(self.fine.analyze(vals, self.L))

    def split(self, x):
        return x[..., : self.n], x[..., self.n :]

    def fields(self, x):
        vp, pp = self.split(x)
        ephi = np.exp(self.syn(pp))
        Phi = np.exp(self.syn(vp)) * self.poly
        return ephi, Phi

    def residual(self, x):
        a, tau, c = self.alpha, self.tau, self.c
        vp, pp = self.split(x)
        ephi, Phi = self.fields(x)
        r1 = self.lap * vp - self.proj(ephi * (tau - Phi))
        r1[0] += 2.0 * self.D.N * math.sqrt(4.0 * math.pi)
        Phi_p = self.proj(Phi)
        r2 = 0.5 * self.lap * pp + a * self.lap * Phi_p + self.proj(a * tau * ephi * (Phi - tau) - c * ephi)
        r2[0] += 2.0 * math.sqrt(4.0 * math.pi)
        return np.concatenate([r1, r2]), (ephi, Phi)

    def sup_norms(self, r):
        r1, r2 = self.split(r)
        return float(np.max(np.abs(self.syn(r1)))), float(np.max(np.abs(self.syn(r2))))

    def jvp(self, fields, d):
        a, tau, c = self.alpha, self.tau, self.c
        ephi, Phi = fields
        dvp, dpp = self.split(d)
        dv, dp = self.syn(dvp), self.syn(dpp)
        j1 = self.lap * dvp + self.proj(ephi * Phi * dv - ephi * (tau - Phi) * dp)
        j2 = (
            0.5 * self.lap * dpp
            + a * self.lap * self.proj(Phi * dv)
            + self.proj(a * tau * ephi * Phi * dv + (a * tau * ephi * (Phi - tau) - c * ephi) * dp)
        )
        return np.concatenate([j1, j2], axis=-1)

    def precondition(self, fields):
        """Right preconditioner ``T`` mapping scaled ``(v, psi)`` to ``(dv, dphi)``."""
        _, Phi = fields
        inv = 1.0 / (self.lap + 1.0)
        a = self.alpha

        def T(y):
            yv, yp = self.split(y)
            dv = inv * yv
            dphi = 2.0 * inv * yp
            if a:
                dphi = dphi - 2.0 * a * self.proj(Phi * self.syn(dv))
            return np.concatenate([dv, dphi], axis=-1)

        return T

    def operator(self, fields):
        T = self.precondition(fields)
        m = 2 * self.n
        return LinearOperator((m, m), matvec=lambda y: self.jvp(fields, T(y)), dtype=float), T

    def sigma_min(self, fields, degree):
        """Smallest singular value of the preconditioned Jacobian compressed to low degree."""
        if degree <= 0:
            return None
        T = self.precondition(fields)
        deg = packed_degrees(self.L)
        keep = np.flatnonzero(deg <= degree)
        idx = np.concatenate([keep, keep + self.n])
        if self.mask is not None:
            idx = idx[self.mask[idx] > 0]
        rows = []
        for a in range(0, idx.size, 64):
            E = np.zeros((min(64, idx.size - a), 2 * self.n))
            E[np.arange(E.shape[0]), idx[a : a + 64]] = 1.0
            rows.append(self.jvp(fields, T(E))[:, idx])
        s = np.linalg.svd(np.vstack(rows), compute_uv=False)
        return float(s[-1])


def _pack_state(state):
    return np.concatenate([state.v.packed(), state.phi.packed()])


def _unpack_state(x, prob, template, **kw):
    vp, pp = prob.split(x)
    return template.copy_with(
        v=ScalarField(prob.grid, coeffs=unpack(vp, prob.L)),
        phi=ScalarField(prob.grid, coeffs=unpack(pp, prob.L)),
        **kw,
    )


def residual(state):
    """Galerkin residuals ``(R1, R2)`` of ``state`` as ScalarFields."""
    prob = _Problem(state.alpha, state.tau, state.divisor, state.L)
    r, _ = prob.residual(_pack_state(state))
    r1, r2 = prob.split(r)
    return ScalarField(prob.grid, coeffs=unpack(r1, prob.L)), ScalarField(prob.grid, coeffs=unpack(r2, prob.L))


def residual_norms(state):
    prob = _Problem(state.alpha, state.tau, state.divisor, state.L)
    r, _ = prob.residual(_pack_state(state))
    return prob.sup_norms(r)


def jacobian(state):
    """Jacobian of the packed residual at ``state`` as a LinearOperator on ``(dv, dphi)``."""
    prob = _Problem(state.alpha, state.tau, state.divisor, state.L)
    fields = prob.fields(_pack_state(state))
    m = 2 * prob.n
    return LinearOperator((m, m), matvec=lambda d: prob.jvp(fields, d), dtype=float)


def packed_residual(state):
    """Packed residual vector, for finite-difference checks against :func:`jacobian`."""
    prob = _Problem(state.alpha, state.tau, state.divisor, state.L)
    return prob.residual(_pack_state(state))[0]


def perturbed(state, d):
    """State displaced by the packed direction ``d = (dv, dphi)``."""
    prob = _Problem(state.alpha, state.tau, state.divisor, state.L)
    return _unpack_state(_pack_state(state) + d, prob, state, converged=False)


def check_inputs(D, tau, alpha, force=False):
    if tau <= 2 * D.N:
        raise ArgumentError(f"tau = {tau:g} <= 2N = {2 * D.N}: vortex threshold tau * Vol/2pi > 2N fails")
    amax = alpha_max(tau, D.N)
    if alpha < 0 or alpha >= amax:
        raise ArgumentError(f"alpha = {alpha:g} outside [0, 1/(tau N)) = [0, {amax:.6g})")
    if not force and not is_admissible(D, tau):
        raise ArgumentError(f"divisor is {classify(D)}: solutions require a polystable divisor (use force)")


def initial_state(D, tau, cfg=None):
    """Decoupled ``alpha = 0`` state: round metric and its vortex solution."""
    cfg = cfg or SolverConfig()
    grid = make_grid(cfg.L)
    phi = ScalarField.constant(grid, 0.0)
    sol = solve_vortex(phi, D, tau, cfg)
    state = SolutionState(phi, sol.v, 0.0, float(tau), D)
    norms = residual_norms(state)
    return state.copy_with(converged=max(norms) < cfg.newton_tol, residual_norms=norms, iterations=sol.iterations)


def solve_at_alpha(init, alpha, cfg=None, force=False):
    """Newton-Krylov solve of the coupled system at ``alpha`` starting from ``init``.

    Parameters
    ----------
    init : SolutionState
        Initial guess (its own alpha is ignored).
    alpha : float
    cfg : SolverConfig, optional
    force : bool
        Skip the polystability check.

    Returns
    -------
    SolutionState
        Converged state with both residual sup norms below ``cfg.newton_tol``.

    Raises
    ------
    NumericalError
        On stagnation; carries the merit history and the smallest singular
        value of the compressed Jacobian.
    """
    cfg = cfg or SolverConfig(L=init.L)
    D, tau = init.divisor, init.tau
    check_inputs(D, tau, alpha, force)
    if init.L != cfg.L:
        g = make_grid(cfg.L)
        init = init.copy_with(phi=ScalarField(g, coeffs=init.phi.coeffs), v=ScalarField(g, coeffs=init.v.coeffs))
    prob = _Problem(alpha, tau, D, cfg.L)
    x = prob.restrict(_pack_state(init))
    r, fields = prob.residual(x)
    norms = prob.sup_norms(r)
    merit = sum(norms)
    history = [norms]
    it = 0
    while max(norms) >= cfg.newton_tol:
        if it >= cfg.max_iter or not np.isfinite(merit):
            raise NumericalError(
                f"Newton did not converge at alpha={alpha:.6g}",
                history=history,
                sigma_min=_safe_sigma(prob, fields, cfg),
            )
        it += 1
        A, T = prob.operator(fields)
        y, info = gmres(
            A, -prob.restrict(r), rtol=cfg.linear_tol, atol=0.0, restart=min(300, 2 * prob.n), maxiter=max(1, cfg.max_linear_iter // 300)
        )
        d = prob.restrict(T(y))
        t = 1.0
        while True:
            x_new = x + t * d
            r_new, fields_new = prob.residual(x_new)
            norms_new = prob.sup_norms(r_new)
            merit_new = sum(norms_new)
            if np.isfinite(merit_new) and merit_new < merit:
                break
            t *= 0.5
            if t < cfg.min_damping:
                raise NumericalError(
                    f"Newton line search stagnated at alpha={alpha:.6g}",
                    history=history,
                    sigma_min=_safe_sigma(prob, fields, cfg),
                    gmres_info=info,
                )
        x, r, fields, norms, merit = x_new, r_new, fields_new, norms_new, merit_new
        history.append(norms)
    sigma = prob.sigma_min(fields, cfg.sigma_degree) if it > 0 else init.sigma_min
    return _unpack_state(
        x, prob, init, alpha=float(alpha), converged=True, residual_norms=norms, iterations=it, sigma_min=sigma,
        history=history,
    )


def _safe_sigma(prob, fields, cfg):
    try:
        return prob.sigma_min(fields, cfg.sigma_degree)
    except (FloatingPointError, np.linalg.LinAlgError, ValueError):
        return None


@dataclass
class ContinuationReport:
    """Record of an alpha-continuation run.

    ``steps`` holds one dict per accepted step; ``rejected`` holds the
    attempted alphas and step sizes of failed Newton solves, which is the
    shrinking-step evidence when the path stalls.
    """

    steps: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    outcome: str = "reached"
    alpha_target: float = 0.0
    stall_alpha: float = None
    elapsed: float = 0.0
    final_state: SolutionState = None
    states: list = field(default_factory=list)

    @property
    def alphas(self):
        return [s["alpha"] for s in self.steps]

    def to_dict(self):
        return {
            "outcome": self.outcome,
            "alpha_target": self.alpha_target,
            "stall_alpha": self.stall_alpha,
            "elapsed": self.elapsed,
            "steps": self.steps,
            "rejected": self.rejected,
        }


def _step_record(state, estimates_fn):
    rec = {
        "alpha": state.alpha,
        "c": state.c,
        "iterations": state.iterations,
        "residual_R1": state.residual_norms[0],
        "residual_R2": state.residual_norms[1],
        "sigma_min": state.sigma_min,
        "volume": state.volume(),
        "mass": state.mass(),
    }
    if estimates_fn is not None:
        rep = estimates_fn(state)
        rec["estimates"] = rep.summary()
        rec["estimates_pass"] = rep.passed
    return rec


def continue_path(start, alpha_target, cfg=None, force=False, estimates_fn="default", keep_states=False):
    """Follow the solution branch from ``start`` to ``alpha_target``.

    Step sizes are measured in units of ``1/(tau N)``.  The predictor is the
    previous solution, or the secant extrapolation once two steps exist.  A
    failed Newton solve halves the step; two consecutive easy solves (at
    most four iterations) grow it by ``cfg.grow``.  When the step falls
    below ``cfg.min_step`` the run ends with ``outcome = "stalled"``.

    Parameters
    ----------
    start : SolutionState
        Converged state at its own alpha.
    alpha_target : float
    cfg : SolverConfig, optional
    force : bool
        Accept non-polystable divisors.
    estimates_fn : callable or "default" or None
        Called on every accepted state; must return an object with
        ``summary()`` and ``passed``.
    keep_states : bool
        Keep every accepted state in ``report.states``.
    """
    cfg = cfg or SolverConfig(L=start.L)
    if estimates_fn == "default":
        from .estimates import run_all

        estimates_fn = run_all
    D, tau = start.divisor, start.tau
    check_inputs(D, tau, alpha_target, force)
    if not start.converged:
        raise ArgumentError("continuation must start from a converged state")
    scale = alpha_max(tau, D.N)
    sign = 1.0 if alpha_target >= start.alpha else -1.0
    t0 = time.perf_counter()
    report = ContinuationReport(alpha_target=float(alpha_target))
    report.steps.append(_step_record(start, estimates_fn))
    if keep_states:
        report.states.append(start)
    prev, cur = None, start
    step = cfg.initial_step
    easy = 0
    while sign * (alpha_target - cur.alpha) > 1e-15:
        a_new = cur.alpha + sign * step * scale
        if sign * (a_new - alpha_target) > 0:
            a_new = alpha_target
        guess = cur
        if prev is not None:
            w = (a_new - cur.alpha) / (cur.alpha - prev.alpha)
            guess = cur.copy_with(phi=cur.phi + (cur.phi - prev.phi) * w, v=cur.v + (cur.v - prev.v) * w)
        try:
            new = solve_at_alpha(guess, a_new, cfg, force=True)
        except NumericalError as exc:
            report.rejected.append(
                {
                    "alpha": a_new,
                    "step": step,
                    "last_merit": float(sum(exc.history[-1])) if exc.history else None,
                    "sigma_min": exc.diagnostics.get("sigma_min"),
                }
            )
            step *= cfg.shrink
            easy = 0
            if step < cfg.min_step:
                report.outcome = "stalled"
                report.stall_alpha = cur.alpha
                break
            continue
        prev, cur = cur, new
        report.steps.append(_step_record(cur, estimates_fn))
        if keep_states:
            report.states.append(cur)
        easy = easy + 1 if new.iterations <= 4 else 0
        if easy >= 2:
            step = min(step * cfg.grow, cfg.max_step)
            easy = 0
    report.final_state = cur
    report.elapsed = time.perf_counter() - t0
    return report


def axisym_solve(D, tau, alpha, n_nodes=64, L=64, tol=1e-12, max_iter=40):
    from .axisym import axisym_solve as _solve

    return _solve(D, tau, alpha, n_nodes=n_nodes, L=L, tol=tol, max_iter=max_iter)
