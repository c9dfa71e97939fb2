"""Real spherical harmonics (N3D, ACN) and the associated Legendre functions.

Convention: the Legendre argument is cos(colatitude), the trigonometric
argument is the azimuth. No Condon-Shortley phase anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap_azimuth(az: float) -> float:
    wrapped = math.fmod(az + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    wrapped -= math.pi
    # fmod can land exactly on +pi after the shift for tiny negative inputs
    return -math.pi if wrapped >= math.pi else wrapped


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere: azimuth in [-pi, pi), colatitude in [0, pi]."""

    azimuth: float
    colatitude: float

    def __post_init__(self):
        if not (math.isfinite(self.azimuth) and math.isfinite(self.colatitude)):
            raise ValueError("direction angles must be finite")
        if not 0.0 <= self.colatitude <= math.pi:
            raise ValueError(f"colatitude {self.colatitude!r} outside [0, pi]")
        object.__setattr__(self, "azimuth", _wrap_azimuth(self.azimuth))

    @classmethod
    def from_degrees(cls, azimuth: float, elevation: float) -> "Direction":
        """Listener convention: elevation 0 is the horizon, +90 the zenith.

        Elevations past the zenith (90..180) continue over the top, so the
        point ends up behind the listener (azimuth + 180).
        """
        colat, az = elevation_to_colatitude(azimuth, elevation)
        return cls(math.radians(az), math.radians(colat))

    @classmethod
    def from_vector(cls, xyz) -> "Direction":
        x, y, z = (float(v) for v in xyz)
        r = math.sqrt(x * x + y * y + z * z)
        if r == 0.0:
            raise ValueError("zero vector has no direction")
        colat = math.acos(max(-1.0, min(1.0, z / r)))
        return cls(math.atan2(y, x), colat)

    def to_vector(self) -> np.ndarray:
        s = math.sin(self.colatitude)
        return np.array(
            [s * math.cos(self.azimuth), s * math.sin(self.azimuth), math.cos(self.colatitude)]
        )

    def angle_to(self, other: "Direction") -> float:
        c = float(np.dot(self.to_vector(), other.to_vector()))
        return math.acos(max(-1.0, min(1.0, c)))


def elevation_to_colatitude(azimuth_deg: float, elevation_deg: float) -> tuple[float, float]:
    """Map (azimuth, elevation) in degrees to (colatitude, azimuth) in degrees.

    elevation in [-90, 90]  -> colatitude = 90 - elevation
    elevation in (90, 180]  -> colatitude = elevation - 90, azimuth + 180
    elevation in [-180, -90) -> colatitude = 270 + elevation, azimuth + 180
    """
    if not -180.0 <= elevation_deg <= 180.0:
        raise ValueError(f"elevation {elevation_deg!r} outside [-180, 180]")
    if elevation_deg > 90.0:
        return elevation_deg - 90.0, azimuth_deg + 180.0
    if elevation_deg < -90.0:
        return 270.0 + elevation_deg, azimuth_deg + 180.0
    return 90.0 - elevation_deg, azimuth_deg


def channel_count(order: int) -> int:
    return (order + 1) ** 2


def acn_index(n: int, m: int) -> int:
    if n < 0 or abs(m) > n:
        raise ValueError(f"invalid (n, m) = ({n}, {m})")
    return n * n + n + m


def acn_to_nm(acn: int) -> tuple[int, int]:
    if acn < 0:
        raise ValueError("negative ACN")
    n = math.isqrt(acn)
    return n, acn - n * n - n


def legendre_table(order: int, x) -> np.ndarray:
    """P_n^m(x) for 0 <= m <= n <= order, shape (order+1, order+1, *x.shape).

    Upward recurrence in n starting from the sectoral term P_m^m.
    Entries with m > n are zero.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("Legendre argument outside [-1, 1]")
    out = np.zeros((order + 1, order + 1) + x.shape)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    pmm = np.ones_like(x)
    for m in range(order + 1):
        if m > 0:
            pmm = pmm * (2 * m - 1) * sin_t
        out[m, m] = pmm
        if m + 1 <= order:
            out[m + 1, m] = x * (2 * m + 1) * pmm
        for n in range(m + 2, order + 1):
            out[n, m] = ((2 * n - 1) * x * out[n - 1, m] - (n + m - 1) * out[n - 2, m]) / (n - m)
    return out


def associated_legendre(n: int, m: int, x: float) -> float:
    """P_n^m(x) without the Condon-Shortley phase."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got n={n}, m={m}")
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"x={x!r} outside [-1, 1]")
    return float(legendre_table(n, x)[n, m])


def _norm(n: int, m: int) -> float:
    am = abs(m)
    k = (2 * n + 1) / (4 * math.pi) * math.factorial(n - am) / math.factorial(n + am)
    if m != 0:
        k *= 2.0
    return math.sqrt(k)


def sh_matrix(order: int, azimuth, colatitude) -> np.ndarray:
    """Real N3D spherical harmonics for arrays of directions.

    Returns shape (*azimuth.shape, (order+1)**2); last axis in ACN order.
    """
    az = np.asarray(azimuth, dtype=float)
    colat = np.asarray(colatitude, dtype=float)
    az, colat = np.broadcast_arrays(az, colat)
    leg = legendre_table(order, np.clip(np.cos(colat), -1.0, 1.0))
    out = np.empty(az.shape + (channel_count(order),))
    for n in range(order + 1):
        for m in range(-n, n + 1):
            base = _norm(n, m) * leg[n, abs(m)]
            if m > 0:
                base = base * np.cos(m * az)
            elif m < 0:
                base = base * np.sin(-m * az)
            out[..., acn_index(n, m)] = base
    return out


def sh_eval(n: int, m: int, direction: Direction) -> float:
    if n < 0 or abs(m) > n:
        raise ValueError(f"invalid (n, m) = ({n}, {m})")
    return float(sh_matrix(n, direction.azimuth, direction.colatitude)[acn_index(n, m)])


def directions_sh(order: int, directions) -> np.ndarray:
    """(len(directions), C) SH sampling matrix for a sequence of Direction."""
    az = np.array([d.azimuth for d in directions], dtype=float)
    colat = np.array([d.colatitude for d in directions], dtype=float)
    return sh_matrix(order, az, colat)
