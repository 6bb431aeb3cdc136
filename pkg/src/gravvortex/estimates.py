"""A priori estimates and pointwise identities satisfied by solutions.

Every check takes a :class:`SolutionState` and returns a list of
:class:`CheckRecord`; :func:`run_all` bundles them into an
:class:`EstimateReport`.  A record passes when ``margin >= -tolerance``,
where ``margin`` is signed so that positive means "inside the bound".
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalError
from .sphere_spectral import ScalarField, grad_sq0, lambda1, laplacian0


@dataclass
class CheckRecord:
    name: str
    measured: float
    bound: float
    margin: float
    tolerance: float
    passed: bool = None
    note: str = ""

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(self.margin >= -self.tolerance)

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (np.floating, float)) and k != "passed" else v) for k, v in asdict(self).items()}


def _upper(name, measured, bound, tol, note=""):
    return CheckRecord(name, float(measured), float(bound), float(bound - measured), float(tol), note=note)


def _lower(name, measured, bound, tol, note=""):
    return CheckRecord(name, float(measured), float(bound), float(measured - bound), float(tol), note=note)


def _info(name, measured, note=""):
    return CheckRecord(name, float(measured), float("nan"), 0.0, 0.0, passed=True, note=note)


@dataclass
class EstimateReport:
    alpha: float
    tau: float
    N: int
    records: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def __getitem__(self, name):
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self):
        return [r for r in self.records if not r.passed]

    def summary(self):
        return {r.name: {"measured": r.measured, "margin": r.margin, "pass": r.passed} for r in self.records}

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "N": self.N,
            "passed": self.passed,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def table(self):
        lines = [f"{'check':<28} {'measured':>14} {'bound':>14} {'margin':>12}  ok"]
        for r in self.records:
            ok = "yes" if r.passed else "NO"
            lines.append(f"{r.name:<28} {r.measured:>14.6g} {r.bound:>14.6g} {r.margin:>12.3e}  {ok}")
        return "\n".join(lines)


class _Derived:
    """Fields of a state on its fine grid, computed once per report."""

    def __init__(self, s):
        self.s = s
        self.grid = s.grid
        self.fine = s.grid.fine
        f = self.fine
        self.phi = f.synthesize(s.phi.coeffs)
        self.Phi = s.Phi_values(f)
        Phi_field = ScalarField(s.grid, coeffs=f.analyze(self.Phi, s.L))
        self.Phi_field = Phi_field
        self.lap_Phi = f.synthesize(laplacian0(Phi_field).coeffs)
        self.S_g = s.scalar_curvature_values(f)
        self.b = s.b_values(f)
        self.b_field = ScalarField(s.grid, coeffs=f.analyze(self.b, s.L))


def _derived(s, d):
    return d if d is not None else _Derived(s)


def check_state_bounds(s, d=None):
    """``0 <= Phi <= tau`` and the mass identity ``(1/2pi) int Phi vol_g = tau - 2N``."""
    d = _derived(s, d)
    target = s.tau - 2 * s.N
    mass = s.mass()
    return [
        _lower("Phi_min", d.Phi.min(), 0.0, 1e-10),
        _upper("Phi_max", d.Phi.max(), s.tau, 1e-10),
        _upper("mass_identity", abs(mass - target) / target, 0.0, 1e-7, note=f"mass={mass:.15g}"),
    ]


def check_scalar_identity(s, d=None):
    """``S_g = c + alpha b + alpha (tau - Phi)^2`` pointwise, and ``S_g >= c``."""
    d = _derived(s, d)
    a, c, tau = s.alpha, s.c, s.tau
    scale = abs(c) + a * tau * tau
    defect = np.max(np.abs(d.S_g - c - a * d.b - a * (tau - d.Phi) ** 2))
    return [
        _upper("scalar_identity", defect, 0.0, 1e-6 * scale),
        _lower("S_g_floor", d.S_g.min(), c, 1e-8),
    ]


def check_derivative_estimate(s, d=None):
    """``sup b <= (3 tau/2 - c)/alpha`` and ``-tau^2/4 <= -Delta_g Phi <= (3 tau/2 - c)/alpha``."""
    if s.alpha <= 0:
        return [_info("b_sup", float("nan"), note="skipped at alpha = 0")]
    d = _derived(s, d)
    bound = (1.5 * s.tau - s.c) / s.alpha
    tol = 1e-6 * max(1.0, bound)
    neg_lap = -np.exp(-d.phi) * d.lap_Phi
    return [
        _upper("b_sup", d.b.max(), bound, tol),
        _upper("neg_lap_Phi_max", neg_lap.max(), bound, tol),
        _lower("neg_lap_Phi_min", neg_lap.min(), -0.25 * s.tau**2, 1e-6 * s.tau**2),
    ]


def check_scalar_bounds(s, d=None):
    """``c <= S_g <= (3 + 2 alpha tau) tau / 2``."""
    d = _derived(s, d)
    upper = (3.0 + 2.0 * s.alpha * s.tau) * s.tau / 2.0
    return [
        _lower("S_g_min", d.S_g.min(), s.c, 1e-8),
        _upper("S_g_max", d.S_g.max(), upper, 1e-8 * upper),
    ]


def k_curvature_values(s, d=None):
    """``S_k`` of ``k = e^{2 alpha Phi} g`` by the closed formula, on the fine grid."""
    d = _derived(s, d)
    a = s.alpha
    return np.exp(-2.0 * a * d.Phi) * (s.c + a * s.tau * (s.tau - d.Phi))


def check_k_metric(s, d=None):
    """Closed form of ``S_k`` against direct curvature, its bounds and gradient bound."""
    d = _derived(s, d)
    a, c, tau = s.alpha, s.c, s.tau
    f = d.fine
    S_k = k_curvature_values(s, d)
    # direct: k = e^{phi + 2 alpha Phi} g0
    psi = s.phi + d.Phi_field * (2.0 * a)
    direct = np.exp(-f.synthesize(psi.coeffs)) * (2.0 + 0.5 * f.synthesize(laplacian0(psi).coeffs))
    rel = np.max(np.abs(direct - S_k)) / max(np.max(np.abs(S_k)), 1e-300)
    S_k_field = ScalarField(s.grid, coeffs=f.analyze(S_k, s.L))
    dS = grad_sq0(S_k_field)
    grad_sq = np.exp(-2.0 * a * s.Phi_values() - s.phi.values) * dS.values
    # the same quantity through the chain rule dS_k = -alpha e^{-2 alpha Phi} (...) dPhi
    Phi_g = s.Phi_values()
    chain = (
        a * a * (2 * c + 2 * a * tau * (tau - Phi_g) + tau) ** 2 * np.exp(-6.0 * a * Phi_g) * Phi_g * s.b_values()
    )
    gbound = 1.5 * a * tau * tau * (2 * c + 2 * a * tau * tau + tau) ** 2
    gscale = max(1.0, gbound)
    return [
        _upper("S_k_closed_vs_direct", rel, 0.0, 1e-6),
        _lower("S_k_min", S_k.min(), c * math.exp(-2.0 * a * tau), 1e-8 * max(1.0, abs(c))),
        _upper("S_k_max", S_k.max(), c + a * tau * tau, 1e-8 * max(1.0, abs(c) + a * tau * tau)),
        _upper("grad_S_k_sq", grad_sq.max(), gbound, 1e-6 * gscale),
        _upper("grad_S_k_chain_rule", np.max(np.abs(grad_sq - chain)), 0.0, 1e-6 * gscale),
    ]


def weitzenbock_values(s, d=None):
    """Weitzenbock remainder ``W`` on the fine grid, with its terms.

    ``W = -Lap b - Phi (tau-Phi)^2 / 4 - (alpha b + c + (tau-Phi)(alpha (tau-Phi) - 3/2) + Phi) b``
    where ``Lap = Delta_g / 2`` is the complex Laplacian (the Riemannian one
    on functions, halved).  A direct Bochner computation gives
    ``W = |Hessian term| + Phi (tau-Phi)^2 / 4``, so ``W >= 0`` and the
    sharp remainder ``W - Phi (tau-Phi)^2 / 4`` is nonnegative as well.
    """
    d = _derived(s, d)
    a, c, tau = s.alpha, s.c, s.tau
    lap_b = 0.5 * np.exp(-d.phi) * d.fine.synthesize(laplacian0(d.b_field).coeffs)
    u = tau - d.Phi
    terms = (-lap_b, -0.25 * d.Phi * u * u, -(a * d.b + c + u * (a * u - 1.5) + d.Phi) * d.b)
    return sum(terms), terms, lap_b


def check_weitzenbock(s, d=None):
    d = _derived(s, d)
    W, terms, lap_b = weitzenbock_values(s, d)
    scale = 1.0 + sum(np.max(np.abs(t)) for t in terms)
    sharp = W + terms[1]
    k = np.argmax(d.b)
    return [
        _lower("weitzenbock_min", W.min(), 0.0, 1e-5 * scale),
        _lower("weitzenbock_sharp_min", sharp.min(), 0.0, 1e-5 * scale),
        # at an interior maximum the positive Laplacian of b is >= 0
        _upper("neg_lap_b_at_argmax", -lap_b.flat[k], 0.0, 1e-6 * scale, note="discrete maximum of b"),
    ]


def check_lambda1(s, d=None):
    try:
        lam = lambda1(s.phi)
    except NumericalError as exc:
        return [CheckRecord("lambda1", float("nan"), s.c, float("nan"), 1e-6, passed=False, note=str(exc))]
    return [_lower("lambda1", lam, s.c, 1e-6)]


CHECKS = (
    check_state_bounds,
    check_scalar_identity,
    check_derivative_estimate,
    check_scalar_bounds,
    check_k_metric,
    check_weitzenbock,
    check_lambda1,
)


def run_all(s, with_lambda1=True):
    """Run every check on ``s`` and collect an :class:`EstimateReport`."""
    d = _Derived(s)
    rep = EstimateReport(float(s.alpha), float(s.tau), int(s.N))
    for chk in CHECKS:
        if chk is check_lambda1 and not with_lambda1:
            continue
        rep.records.extend(chk(s, d))
    return rep
