"""Spectral calculus on the round 2-sphere of total area 2*pi.

The background metric ``g0`` is the round metric of radius ``1/sqrt(2)``, so
that its Gauss curvature is ``S_g0 = 2`` and the positive Laplacian acts on
degree-``k`` harmonics by ``2 k (k + 1)``.  Fields are expanded in complex
orthonormal (on the unit sphere) harmonics ``Y_lm = P_lm(cos theta) e^{i m lon}``
with ``m >= 0`` stored explicitly; real fields satisfy ``c_{l,-m} = conj(c_lm)``.

Grids are Gauss-Legendre in ``cos theta`` times equispaced longitude, so
products of two degree-``L`` fields are integrated exactly.
"""

import math
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import ConfigurationError, NumericalError

MIN_DEGREE = 8
AREA = 2.0 * math.pi


def legendre_table(lmax, x):
    """Orthonormal associated Legendre functions and their theta-derivatives.

    Returns ``(P, dP)`` with shape ``(lmax+1, lmax+1, len(x))`` indexed
    ``[m, l, i]``; entries with ``l < m`` are zero.  Normalization:
    ``2 pi int_{-1}^{1} P_lm(x)^2 dx = 1``.  ``dP`` is ``d/dtheta`` with
    ``x = cos theta`` and requires ``|x| < 1``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    n = x.size
    P = np.zeros((lmax + 1, lmax + 1, n))
    pmm = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = pmm * s * math.sqrt((2.0 * m + 1.0) / (2.0 * m))
        P[m, m] = pmm
        if m + 1 <= lmax:
            P[m, m + 1] = math.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[m, l] = a * (x * P[m, l - 1] - b * P[m, l - 2])
    dP = np.zeros_like(P)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_s = np.where(s > 0, 1.0 / s, 0.0)
    for m in range(lmax + 1):
        for l in range(max(m, 1), lmax + 1):
            term = l * x * P[m, l]
            if l - 1 >= m:
                term = term - math.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l * l - m * m)) * P[m, l - 1]
            dP[m, l] = term * inv_s
    return P, dP


def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on ``[-1, 1]`` with end-node weights to full precision.

    Nodes come from :func:`numpy.polynomial.legendre.leggauss`.  Its weights
    lose about ``n^2 eps`` relative accuracy near ``x = +-1``, because the
    weight formula is steep there and the node is rounded.  Here the weight
    is re-evaluated at the node shifted by its sub-ulp Newton correction,
    to first order.
    """
    x, _ = np.polynomial.legendre.leggauss(n)
    p0, p1 = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    one_m = (1.0 - np.abs(x)) * (1.0 + np.abs(x))
    dp = n * (p0 - x * p1) / one_m
    delta = -p1 / dp
    # f = (1 - x^2) P_n'^2 and its derivative via the Legendre equation
    f = one_m * dp * dp
    df = 2.0 * x * dp * dp - 2.0 * n * (n + 1) * p1 * dp
    return x, 2.0 / (f + delta * df)


def degrees(L):
    """Array ``l[l, m]`` of harmonic degrees for coefficient arrays of degree ``L``."""
    return np.broadcast_to(np.arange(L + 1)[:, None], (L + 1, L + 1)).astype(float)


def laplacian_eigenvalues(L):
    """Eigenvalues ``2 l (l+1)`` of the area-2pi Laplacian, shaped ``[l, m]``."""
    l = degrees(L)
    return 2.0 * l * (l + 1.0)


def valid_mask(L):
    l = np.arange(L + 1)[:, None]
    m = np.arange(L + 1)[None, :]
    return m <= l


def packed_size(L):
    return (L + 1) ** 2


def pack(coeffs):
    """Complex ``[l, m]`` coefficients -> real vector with Euclidean = L2(unit) inner product.

    Leading batch dimensions are preserved.
    """
    L = coeffs.shape[-1] - 1
    r2 = math.sqrt(2.0)
    parts = [coeffs[..., :, 0].real]
    for m in range(1, L + 1):
        seg = coeffs[..., m:, m]
        parts.append(r2 * seg.real)
        parts.append(r2 * seg.imag)
    return np.concatenate(parts, axis=-1)


def unpack(vec, L):
    """Inverse of :func:`pack`."""
    vec = np.asarray(vec)
    c = np.zeros(vec.shape[:-1] + (L + 1, L + 1), dtype=complex)
    c[..., :, 0] = vec[..., : L + 1]
    k = L + 1
    r2 = math.sqrt(2.0)
    for m in range(1, L + 1):
        n = L + 1 - m
        c[..., m:, m] = (vec[..., k : k + n] + 1j * vec[..., k + n : k + 2 * n]) / r2
        k += 2 * n
    return c


def packed_degrees(L):
    """Harmonic degree of each entry of a packed vector."""
    out = np.empty(packed_size(L))
    out[: L + 1] = np.arange(L + 1)
    k = L + 1
    for m in range(1, L + 1):
        ls = np.arange(m, L + 1)
        n = ls.size
        out[k : k + n] = ls
        out[k + n : k + 2 * n] = ls
        k += 2 * n
    return out


def packed_orders(L):
    """Harmonic order ``m`` of each entry of a packed vector."""
    out = np.zeros(packed_size(L))
    k = L + 1
    for m in range(1, L + 1):
        n = 2 * (L + 1 - m)
        out[k : k + n] = m
        k += n
    return out


def resize(coeffs, L):
    """Truncate or zero-pad a coefficient array to degree ``L``."""
    L0 = coeffs.shape[0] - 1
    out = np.zeros((L + 1, L + 1), dtype=complex)
    k = min(L, L0) + 1
    out[:k, :k] = coeffs[:k, :k]
    return out


class SphereGrid:
    """Gauss-Legendre x equispaced-longitude collocation grid of degree ``L``.

    ``weights`` is the area measure of ``g0`` at each node and sums to 2pi.
    Transforms between node values and coefficients of any degree
    ``Lc <= L`` are exact for band-limited data.
    """

    def __init__(self, L):
        if int(L) != L or L < MIN_DEGREE:
            raise ConfigurationError(f"spectral degree must be an integer >= {MIN_DEGREE}, got {L}")
        self.L = int(L)
        self.n_lat = self.L + 1
        self.n_lon = 2 * self.L + 2
        x, w = gauss_legendre(self.n_lat)
        order = np.argsort(-x)
        self.x = x[order]
        self.lat_weights = w[order]
        self.theta = np.arccos(self.x)
        self.sin_theta = np.sqrt(1.0 - self.x**2)
        self.lon = 2.0 * math.pi * np.arange(self.n_lon) / self.n_lon
        # unit-sphere area element is dx dlon; g0 has half of it
        self.weights = np.outer(self.lat_weights, np.full(self.n_lon, math.pi / self.n_lon))
        self._tables = {}
        self._tables_t = {}
        self._fine = None

    def __repr__(self):
        return f"SphereGrid(L={self.L}, n_lat={self.n_lat}, n_lon={self.n_lon})"

    @property
    def shape(self):
        return (self.n_lat, self.n_lon)

    @property
    def fine(self):
        """Companion grid with 3/2 oversampling for nonlinear products."""
        if self._fine is None:
            self._fine = SphereGrid((3 * self.L + 1) // 2)
        return self._fine

    def points(self):
        """Unit vectors of the nodes, shape ``(n_lat, n_lon, 3)``."""
        st = self.sin_theta[:, None]
        return np.stack(
            [st * np.cos(self.lon)[None, :], st * np.sin(self.lon)[None, :], np.broadcast_to(self.x[:, None], self.shape)],
            axis=-1,
        )

    def table(self, Lc):
        """``(P, dP)`` tables of degree ``Lc`` at this grid's nodes, each shaped ``[m, l, i]``."""
        if Lc > self.L:
            raise ConfigurationError(f"coefficient degree {Lc} exceeds grid degree {self.L}")
        if Lc not in self._tables:
            if self._tables and max(self._tables) >= Lc:
                P, dP = self._tables[max(self._tables)]
                self._tables[Lc] = (
                    np.ascontiguousarray(P[: Lc + 1, : Lc + 1]),
                    np.ascontiguousarray(dP[: Lc + 1, : Lc + 1]),
                )
            else:
                self._tables[Lc] = legendre_table(Lc, self.x)
        return self._tables[Lc]

    def _table_t(self, Lc, which=0):
        key = (Lc, which)
        if key not in self._tables_t:
            self._tables_t[key] = np.ascontiguousarray(np.swapaxes(self.table(Lc)[which], 1, 2))
        return self._tables_t[key]

    def _legendre_synthesis(self, coeffs, which=0):
        # coeffs (..., l, m) -> G (..., i, m) via one real batched matmul over m
        Lc = coeffs.shape[-2] - 1
        batch = coeffs.shape[:-2]
        C = np.moveaxis(coeffs.reshape((-1, Lc + 1, Lc + 1)), 0, -1)  # (l, m, B)
        C = np.concatenate([C.real, C.imag], axis=-1).transpose(1, 0, 2)  # (m, l, 2B)
        G = self._table_t(Lc, which) @ np.ascontiguousarray(C)  # (m, i, 2B)
        nb = G.shape[-1] // 2
        G = (G[..., :nb] + 1j * G[..., nb:]).transpose(2, 1, 0)  # (B, i, m)
        return G.reshape(batch + G.shape[1:])

    def _longitude_synthesis(self, G):
        # G[..., i, m] -> values, f = G_0 + 2 Re sum_m G_m e^{i m lon}
        X = np.zeros(G.shape[:-1] + (self.n_lon // 2 + 1,), dtype=complex)
        X[..., : G.shape[-1]] = G
        return np.fft.irfft(X, n=self.n_lon, axis=-1) * self.n_lon

    def synthesize(self, coeffs):
        """Node values of a field given coefficients of degree ``<= L``.

        Leading batch dimensions are allowed.
        """
        return self._longitude_synthesis(self._legendre_synthesis(coeffs))

    def analyze(self, values, Lc=None):
        """Project node values onto harmonics of degree ``<= Lc`` (default ``L``)."""
        Lc = self.L if Lc is None else Lc
        P, _ = self.table(Lc)
        values = np.asarray(values)
        batch = values.shape[:-2]
        F = np.fft.rfft(values, axis=-1)[..., : Lc + 1] * (2.0 * math.pi / self.n_lon)
        F = F * self.lat_weights[:, None]
        F = F.reshape((-1,) + F.shape[-2:]).transpose(2, 1, 0)  # (m, i, B)
        F = np.ascontiguousarray(np.concatenate([F.real, F.imag], axis=-1))
        C = P @ F  # (m, l, 2B)
        nb = C.shape[-1] // 2
        C = (C[..., :nb] + 1j * C[..., nb:]).transpose(2, 1, 0)  # (B, l, m)
        return C.reshape(batch + C.shape[1:])

    def gradient(self, coeffs):
        """``(d f/d theta, (1/sin theta) d f/d lon)`` at the nodes (unit-sphere frame)."""
        Lc = coeffs.shape[-2] - 1
        m = np.arange(Lc + 1)
        f_t = self._longitude_synthesis(self._legendre_synthesis(coeffs, which=1))
        f_l = self._longitude_synthesis(self._legendre_synthesis(coeffs * (1j * m)))
        return f_t, f_l / self.sin_theta[:, None]

    def integrate(self, values):
        """Quadrature of node values against ``vol_g0``."""
        return float(np.sum(self.weights * values))


_GRID_CACHE = {}


def make_grid(L):
    """Return the (cached) grid of degree ``L``; ``L >= 8``."""
    if not isinstance(L, (int, np.integer)) or L < MIN_DEGREE:
        raise ConfigurationError(f"spectral degree must be an integer >= {MIN_DEGREE}, got {L!r}")
    L = int(L)
    if L not in _GRID_CACHE:
        _GRID_CACHE[L] = SphereGrid(L)
    return _GRID_CACHE[L]


def evaluate_at(coeffs, points, chunk=2048):
    """Evaluate a degree-``L`` expansion at arbitrary unit vectors ``points`` (..., 3)."""
    pts = np.asarray(points, dtype=float)
    shp = pts.shape[:-1]
    pts = pts.reshape(-1, 3)
    Lc = coeffs.shape[0] - 1
    out = np.empty(pts.shape[0])
    mw = np.where(np.arange(Lc + 1) == 0, 1.0, 2.0)
    for a in range(0, pts.shape[0], chunk):
        p = pts[a : a + chunk]
        x = np.clip(p[:, 2], -1.0, 1.0)
        lon = np.arctan2(p[:, 1], p[:, 0])
        P = legendre_table(Lc, x)[0]
        G = np.einsum("mli,lm->im", P, coeffs, optimize=True)
        E = np.exp(1j * np.outer(lon, np.arange(Lc + 1)))
        out[a : a + chunk] = np.sum((G * E).real * mw[None, :], axis=1)
    return out.reshape(shp)


class ScalarField:
    """A real function on the sphere: node values plus harmonic coefficients.

    Either representation may be supplied; the other is computed lazily.
    Fields are treated as immutable.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("ScalarField needs values or coeffs")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=float)
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape[0] - 1 != grid.L:
                coeffs = resize(coeffs, grid.L)
        self._coeffs = coeffs
        if self._values is not None and self._values.shape != grid.shape:
            raise ValueError(f"values shape {self._values.shape} does not match grid {grid.shape}")

    @classmethod
    def from_values(cls, grid, values):
        return cls(grid, values=values)

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, coeffs=coeffs)

    @classmethod
    def constant(cls, grid, value):
        c = np.zeros((grid.L + 1, grid.L + 1), dtype=complex)
        c[0, 0] = value * math.sqrt(4.0 * math.pi)
        return cls(grid, coeffs=c)

    @classmethod
    def from_function(cls, grid, fn):
        """Sample ``fn(points)`` where ``points`` has shape ``(n_lat, n_lon, 3)``."""
        return cls(grid, values=fn(grid.points()))

    @property
    def values(self):
        if self._values is None:
            self._values = self.grid.synthesize(self._coeffs)
        return self._values

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = self.grid.analyze(self._values)
        return self._coeffs

    @property
    def L(self):
        return self.grid.L

    def packed(self):
        return pack(self.coeffs)

    def fine_values(self):
        """Node values on the 3/2-oversampled companion grid."""
        return self.grid.fine.synthesize(self.coeffs)

    def evaluate(self, points):
        return evaluate_at(self.coeffs, points)

    def max(self):
        return float(np.max(self.values))

    def min(self):
        return float(np.min(self.values))

    def _binary(self, other, op):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, coeffs=op(self.coeffs, other.coeffs))
        c = self.coeffs.copy()
        if op is np.add:
            c[0, 0] += other * math.sqrt(4.0 * math.pi)
            return ScalarField(self.grid, coeffs=c)
        if op is np.subtract:
            c[0, 0] -= other * math.sqrt(4.0 * math.pi)
            return ScalarField(self.grid, coeffs=c)
        return ScalarField(self.grid, coeffs=op(c, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self)._binary(other, np.add)

    def __neg__(self):
        return ScalarField(self.grid, coeffs=-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return pointwise(np.multiply, self, other)
        return ScalarField(self.grid, coeffs=self.coeffs * other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ScalarField(L={self.grid.L}, min={self.min():.4g}, max={self.max():.4g})"


def pointwise(fn, *fields):
    """Apply a nonlinear pointwise map on the oversampled grid and project back."""
    grid = fields[0].grid
    fine = grid.fine
    vals = [fine.synthesize(f.coeffs) for f in fields]
    return ScalarField(grid, coeffs=fine.analyze(fn(*vals), grid.L))


def laplacian0(f):
    """Positive Laplace-Beltrami operator of the area-2pi round metric."""
    return ScalarField(f.grid, coeffs=f.coeffs * laplacian_eigenvalues(f.grid.L))


def grad_sq0(f):
    """Pointwise ``|grad f|^2`` in ``g0``, computed spectrally at the nodes of ``f.grid``."""
    f_t, f_l = f.grid.gradient(f.coeffs)
    # g0 = g_unit / 2, so |df|^2_{g0} = 2 |df|^2_unit
    return ScalarField(f.grid, values=2.0 * (f_t**2 + f_l**2))


def quadrature(f, weight=None):
    """``int f e^weight vol_g0`` (``weight=None`` means the plain ``g0`` volume)."""
    if weight is None:
        if f._values is not None and f._coeffs is None:
            return f.grid.integrate(f._values)
        # int Y_00 dA_unit = sqrt(4 pi); vol_g0 = dA_unit / 2
        return float(f.coeffs[0, 0].real * math.sqrt(4.0 * math.pi) / 2.0)
    fine = f.grid.fine
    vals = fine.synthesize(f.coeffs) * np.exp(fine.synthesize(weight.coeffs))
    return fine.integrate(vals)


def _weighted_mass_operator(phi):
    """Galerkin matrix-free operator ``u -> P_L(e^phi u)`` on packed coefficients."""
    grid = phi.grid
    fine = grid.fine
    L = grid.L
    w = np.exp(fine.synthesize(phi.coeffs))

    def matvec(x):
        x = np.asarray(x)
        if x.ndim == 2:
            return np.column_stack([matvec(col) for col in x.T])
        u = fine.synthesize(unpack(x, L))
        return pack(fine.analyze(w * u, L))

    n = packed_size(L)
    return LinearOperator((n, n), matvec=matvec, matmat=matvec, dtype=float)


def lambda1(phi, tol=1e-11, maxiter=400, return_vector=False):
    """First nonzero eigenvalue of ``Delta_g`` for ``g = e^phi g0``.

    Solves ``Delta_g0 u = lam e^phi u`` in the degree-``L`` Galerkin space,
    orthogonally (in the ``e^phi`` inner product) to constants, with LOBPCG
    preconditioned by the inverse round Laplacian.
    """
    grid = phi.grid
    L = grid.L
    n = packed_size(L)
    lam = 2.0 * packed_degrees(L) * (packed_degrees(L) + 1.0)
    A = LinearOperator((n, n), matvec=lambda x: lam * x if x.ndim == 1 else lam[:, None] * x, dtype=float)
    B = _weighted_mass_operator(phi)
    inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 1.0)
    M = LinearOperator((n, n), matvec=lambda x: inv * x if x.ndim == 1 else inv[:, None] * x, dtype=float)
    Y = np.zeros((n, 1))
    Y[0, 0] = 1.0
    # initial block: the three degree-1 harmonics and two degree-2 ones
    X = np.zeros((n, 5))
    deg = packed_degrees(L)
    idx1 = np.flatnonzero(deg == 1)
    idx2 = np.flatnonzero(deg == 2)[:2]
    for j, k in enumerate(list(idx1) + list(idx2)):
        X[k, j] = 1.0
    # exact eigenvectors in the start block break the Rayleigh-Ritz step
    low = deg <= 4
    X[low] += 1e-3 * np.random.default_rng(12345).standard_normal((int(low.sum()), 5))
    X[0] = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals, vecs, hist = lobpcg(
            A, X, B=B, M=M, Y=Y, tol=tol, maxiter=maxiter, largest=False, retResidualNormsHistory=True
        )
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    v = vecs[:, 0]
    Bv = B.matvec(v)
    res = np.linalg.norm(lam * v - vals[0] * Bv) / max(1.0, abs(vals[0])) / np.linalg.norm(Bv)
    if not np.isfinite(vals[0]) or res > 1e-8:
        raise NumericalError(
            "eigenvalue iteration did not converge",
            history=[np.asarray(h).tolist() for h in hist],
            eigenvalues=vals.tolist(),
            relative_residual=float(res),
        )
    if return_vector:
        return float(vals[0]), ScalarField(grid, coeffs=unpack(v, L))
    return float(vals[0])
