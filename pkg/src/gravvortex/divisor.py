"""Effective divisors on the Riemann sphere and their GIT stability class.

Points are stored as unit vectors.  Stereographic coordinates put the north
pole ``(0, 0, 1)`` at infinity: ``z = (x + i y) / (1 - x3)``.
"""

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

MIN_SEPARATION = 1e-9


class StabilityClass(str, enum.Enum):
    STABLE = "Stable"
    STRICTLY_POLYSTABLE = "StrictlyPolystable"
    SEMISTABLE_NOT_POLYSTABLE = "SemistableNotPolystable"
    UNSTABLE = "Unstable"

    def __str__(self):
        return self.value

    @property
    def polystable(self):
        return self in (StabilityClass.STABLE, StabilityClass.STRICTLY_POLYSTABLE)


def lonlat_to_vec(lon_deg, lat_deg):
    lon, lat = math.radians(lon_deg), math.radians(lat_deg)
    return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])


def vec_to_lonlat(v):
    v = np.asarray(v, dtype=float)
    lat = math.degrees(math.asin(max(-1.0, min(1.0, v[2]))))
    lon = math.degrees(math.atan2(v[1], v[0])) if math.hypot(v[0], v[1]) > 1e-15 else 0.0
    return lon, lat


def stereo_to_vec(z):
    """Stereographic coordinate (``None`` or ``inf`` for the north pole) to unit vector."""
    if z is None or (isinstance(z, (complex, float)) and math.isinf(abs(z))):
        return np.array([0.0, 0.0, 1.0])
    z = complex(z)
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, r2 - 1.0]) / (r2 + 1.0)


def homogeneous_to_vec(u, w):
    uu, ww = abs(u) ** 2, abs(w) ** 2
    q = u * w.conjugate()
    v = np.array([2 * q.real, 2 * q.imag, uu - ww]) / (uu + ww)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class Divisor:
    """``D = sum_j n_j p_j`` with distinct points ``p_j`` on the unit sphere."""

    points: tuple
    mults: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[-1] != 3:
            raise ArgumentError("divisor points must be 3-vectors")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms < 1e-12):
            raise ArgumentError("divisor point has zero length")
        pts = pts / norms[:, None]
        mults = tuple(int(n) for n in self.mults)
        if len(mults) != pts.shape[0]:
            raise ArgumentError("one multiplicity per point is required")
        if not mults or any(n < 1 for n in mults):
            raise ArgumentError("multiplicities must be positive integers")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                ang = 2.0 * math.asin(min(1.0, np.linalg.norm(pts[i] - pts[j]) / 2.0))
                if ang <= MIN_SEPARATION:
                    raise ArgumentError(f"divisor points {i} and {j} coincide")
        object.__setattr__(self, "points", tuple(tuple(float(c) for c in p) for p in pts))
        object.__setattr__(self, "mults", mults)

    @property
    def N(self):
        return sum(self.mults)

    @property
    def vectors(self):
        return np.array(self.points)

    def __len__(self):
        return len(self.mults)

    @classmethod
    def from_lonlat(cls, lonlat, mults):
        return cls(tuple(tuple(lonlat_to_vec(lo, la)) for lo, la in lonlat), tuple(mults))

    @classmethod
    def from_json(cls, data):
        """Parse ``{"points": [{"lon": deg, "lat": deg}, ...], "mults": [...]}``."""
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        try:
            pts = [(float(p["lon"]), float(p["lat"])) for p in data["points"]]
            mults = [int(n) for n in data["mults"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"malformed divisor JSON: {exc}") from exc
        return cls.from_lonlat(pts, mults)

    def to_json(self):
        pts = []
        for p in self.points:
            lon, lat = vec_to_lonlat(p)
            pts.append({"lon": lon, "lat": lat})
        return {"points": pts, "mults": list(self.mults)}

    def stereographic(self):
        """Stereographic coordinates; ``None`` marks the point at infinity."""
        out = []
        for p in self.points:
            if p[2] > 1.0 - 1e-15:
                out.append(None)
            else:
                out.append(complex(p[0], p[1]) / (1.0 - p[2]))
        return out


def is_reflection_symmetric(D, tol=1e-12):
    """True when ``D`` is invariant under the reflection ``x3 -> -x3``."""
    pts = D.vectors
    refl = pts * np.array([1.0, 1.0, -1.0])
    for q, n in zip(refl, D.mults):
        d = np.linalg.norm(pts - q, axis=1)
        j = int(np.argmin(d))
        if d[j] > tol or D.mults[j] != n:
            return False
    return True


def antipodal(mults=(1, 1)):
    """Two points at the poles: south pole first, north pole second."""
    return Divisor(((0.0, 0.0, -1.0), (0.0, 0.0, 1.0)), tuple(mults))


def equatorial(k, mults=None):
    """``k`` equally spaced points on the equator starting at longitude 0."""
    mults = (1,) * k if mults is None else tuple(mults)
    return Divisor.from_lonlat([(360.0 * j / k, 0.0) for j in range(k)], mults)


def classify(D):
    """GIT stability class of ``D`` for the SL(2,C) action on binary forms."""
    N = D.N
    top = max(D.mults)
    if 2 * top < N:
        return StabilityClass.STABLE
    if 2 * top > N:
        return StabilityClass.UNSTABLE
    if len(D.mults) == 2:
        return StabilityClass.STRICTLY_POLYSTABLE
    return StabilityClass.SEMISTABLE_NOT_POLYSTABLE


def is_admissible(D, tau):
    """Existence condition for ``alpha`` in ``(0, 1/(tau N))``: ``tau > 2N`` and polystable."""
    if tau <= 0:
        raise ArgumentError("tau must be positive")
    return tau > 2 * D.N and classify(D).polystable


def mobius_apply(sigma, D):
    """Move the points of ``D`` by the fractional linear map ``sigma`` (det 1)."""
    s = np.asarray(sigma, dtype=complex)
    if s.shape != (2, 2):
        raise ArgumentError("sigma must be a 2x2 matrix")
    if abs(np.linalg.det(s) - 1.0) >= 1e-12:
        raise ArgumentError("sigma must have determinant 1")
    if np.linalg.cond(s) > 1e12:
        raise ArgumentError("sigma is numerically singular")
    new = []
    for p in D.vectors:
        u, w = _homog(p)
        u2 = s[0, 0] * u + s[0, 1] * w
        w2 = s[1, 0] * u + s[1, 1] * w
        new.append(tuple(homogeneous_to_vec(u2, w2)))
    return Divisor(tuple(new), D.mults)


def _homog(p):
    # z = (x + i y)/(1 - h) = (1 + h)/(x - i y); pick the better-conditioned form
    x, y, h = p
    if h <= 0:
        return complex(x, y), complex(1.0 - h)
    return complex(1.0 + h), complex(x, -y)
