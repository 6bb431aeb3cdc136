"""Colatitude profiles and grid tables of derived fields, for CSV export."""

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .green import multipole
from .sphere_spectral import ScalarField, evaluate_at, laplacian0

COLUMNS = ("theta", "lon", "x", "phi", "Phi", "S_g", "b", "S_k", "weight")

HEADER = (
    "# gravvortex profile; background g0 round of area 2*pi (S_g0 = 2); "
    "theta colatitude [rad], lon longitude [rad], x = cos(theta); "
    "g = exp(phi) g0; Phi = |phi|_h^2; S_g scalar curvature of g; "
    "b = |grad Phi|_g^2 / Phi; S_k curvature of exp(2 alpha Phi) g; "
    "weight = g0-area weight (grid tables only, 0 on profiles)"
)


def is_zonal(state, tol=1e-8):
    return all(np.max(np.abs(f.coeffs[:, 1:])) <= tol for f in (state.phi, state.v))


def _fields_at(state, pts):
    a, c, tau = state.alpha, state.c, state.tau
    fine = state.grid.fine
    b_field = ScalarField(state.grid, coeffs=fine.analyze(state.b_values(fine), state.L))
    phi = evaluate_at(state.phi.coeffs, pts).real
    lap = evaluate_at(laplacian0(state.phi).coeffs, pts).real
    Phi = np.exp(evaluate_at(state.v.coeffs, pts).real) * multipole(state.divisor).exp4pi(pts)
    S_g = np.exp(-phi) * (2.0 + 0.5 * lap)
    b = evaluate_at(b_field.coeffs, pts).real
    S_k = np.exp(-2.0 * a * Phi) * (c + a * tau * (tau - Phi))
    return phi, Phi, S_g, b, S_k


def profile_table(state, n=181, lon=0.0, full_grid=None):
    """Rows of :data:`COLUMNS`.

    A zonal state gives one meridian at ``lon`` with ``n`` equispaced
    colatitudes including both poles.  Otherwise (or with
    ``full_grid=True``) every node of the state's grid is listed with its
    area weight.
    """
    if n < 2:
        raise ArgumentError("profile needs at least two samples")
    full = (not is_zonal(state)) if full_grid is None else full_grid
    if full:
        g = state.grid
        pts = g.points().reshape(-1, 3)
        theta = np.repeat(g.theta, g.n_lon)
        lons = np.tile(g.lon, g.n_lat)
        w = g.weights.reshape(-1)
    else:
        theta = np.linspace(0.0, math.pi, n)
        lons = np.full(n, float(lon))
        pts = np.stack([np.sin(theta) * math.cos(lon), np.sin(theta) * math.sin(lon), np.cos(theta)], axis=-1)
        pts[0], pts[-1] = (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)
        w = np.zeros(n)
    phi, Phi, S_g, b, S_k = _fields_at(state, pts)
    return np.column_stack([theta, lons, np.cos(theta), phi, Phi, S_g, b, S_k, w])


def write_csv(rows, path, meta=None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(HEADER + "\n")
        if meta:
            fh.write("# " + "; ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
    return path


def read_csv(path):
    """Columns of a profile CSV as a dict of arrays."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rdr = csv.reader(lines)
    head = next(rdr)
    data = np.array([[float(x) for x in r] for r in rdr if r])
    return {k: data[:, i] for i, k in enumerate(head)}


def mass_from_profile(cols):
    """``(1/2pi) int Phi vol_g`` re-integrated from a CSV table.

    Meridian profiles use the trapezoid rule in ``theta`` with
    ``vol_g0 = (1/2) sin(theta) dtheta dlon``; grid tables sum the stored
    weights.
    """
    dens = cols["Phi"] * np.exp(cols["phi"])
    if np.any(cols["weight"] > 0):
        return float(np.sum(dens * cols["weight"]) / (2.0 * math.pi))
    return float(0.5 * np.trapezoid(dens * np.sin(cols["theta"]), cols["theta"]))
