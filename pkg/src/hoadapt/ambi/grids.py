"""Sampling grids on the sphere: capsule arrays and loudspeaker layouts.

Built-in grids are uniform-weight spherical designs. A t-design integrates
every polynomial of degree <= t exactly with equal weights, so a 2N-design
makes the discrete SH projection orthonormal up to order N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import least_squares

from .frames import AmbisonicFrame, OrderError, ShapeError
from .sh import Direction, channel_count, directions_sh, sh_matrix

FOUR_PI = 4.0 * math.pi
QUADRATURE_TOL = 1e-6


def quadrature_gram(directions, weights, order: int) -> np.ndarray:
    """Weighted inner products of all SH pairs up to `order` over the grid."""
    Y = directions_sh(order, directions)
    w = np.asarray(weights, dtype=float)
    return (Y * w[:, None]).T @ Y


@dataclass(frozen=True, eq=False)
class CapsuleArray:
    directions: tuple[Direction, ...]
    weights: np.ndarray
    order_limit: int
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "directions", tuple(self.directions))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        q = len(self.directions)
        if w.shape != (q,):
            raise ShapeError(f"{q} capsules but {w.shape} weights")
        if q < channel_count(self.order_limit):
            raise OrderError(f"{q} capsules cannot support order {self.order_limit}")
        if abs(w.sum() - FOUR_PI) > 1e-9 * FOUR_PI:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 4*pi")
        err = np.abs(quadrature_gram(self.directions, w, self.order_limit) - np.eye(channel_count(self.order_limit))).max()
        if err > QUADRATURE_TOL:
            raise ValueError(f"grid is not a valid quadrature up to order {self.order_limit} (error {err:.3g})")

    @property
    def count(self) -> int:
        return len(self.directions)

    def sh_matrix(self, order: int) -> np.ndarray:
        return directions_sh(order, self.directions)


@dataclass(frozen=True, eq=False)
class LoudspeakerLayout:
    """Virtual loudspeakers plus a mode-matching (pseudo-inverse) decoder."""

    directions: tuple[Direction, ...]
    order: int
    name: str = "custom"
    sh: np.ndarray = field(init=False, repr=False)
    decode_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "directions", tuple(self.directions))
        c = channel_count(self.order)
        if len(self.directions) < c:
            raise OrderError(f"{len(self.directions)} loudspeakers cannot decode order {self.order}")
        # C x S: column s holds the SH of loudspeaker s
        sh = directions_sh(self.order, self.directions).T
        decode = np.linalg.pinv(sh)
        if np.abs(sh @ decode - np.eye(c)).max() > 1e-6:
            raise ValueError("layout is rank deficient for this order")
        object.__setattr__(self, "sh", sh)
        object.__setattr__(self, "decode_matrix", decode)

    @property
    def count(self) -> int:
        return len(self.directions)

    def vectors(self) -> np.ndarray:
        return np.array([d.to_vector() for d in self.directions])

    def nearest(self, direction: Direction) -> int:
        return int(np.argmax(self.vectors() @ direction.to_vector()))


def decode_loudspeakers(frame: AmbisonicFrame, layout: LoudspeakerLayout) -> np.ndarray:
    """Speakers x frame_length loudspeaker feeds; lower-order frames are implicitly zero-extended."""
    if frame.order > layout.order:
        raise ShapeError(f"layout decodes up to order {layout.order}, frame has order {frame.order}")
    return layout.decode_matrix[:, : frame.channel_count] @ frame.samples


# --- generators -------------------------------------------------------------


def fibonacci_directions(count: int) -> list[Direction]:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    az = math.pi * (1.0 + math.sqrt(5.0)) * i
    return [Direction(float(a), float(math.acos(zz))) for a, zz in zip(az, z)]


def spherical_design(strength: int, count: int, tol: float = 1e-12) -> list[Direction]:
    """Numerically search a uniform-weight spherical `strength`-design.

    Starts from a Fibonacci lattice and drives the sums of all SH of degree
    1..strength over the points to zero.
    """
    start = fibonacci_directions(count)
    x0 = np.array([d.azimuth for d in start] + [d.colatitude for d in start])

    def residual(x):
        Y = sh_matrix(strength, x[:count], x[count:])
        return Y[:, 1:].sum(axis=0) / count

    sol = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=50000)
    if np.abs(sol.fun).max() > tol:
        raise RuntimeError(f"no {strength}-design with {count} points found (residual {np.abs(sol.fun).max():.3g})")
    az, colat = sol.x[:count], sol.x[count:]
    vecs = np.stack([np.sin(colat) * np.cos(az), np.sin(colat) * np.sin(az), np.cos(colat)], axis=1)
    return [Direction.from_vector(v) for v in vecs]


def gauss_grid(order: int) -> CapsuleArray:
    """Gauss-Legendre x equiangular product grid, exact up to `order`."""
    x, wx = np.polynomial.legendre.leggauss(order + 1)
    naz = 2 * order + 1
    dirs, weights = [], []
    for xi, wi in zip(x, wx):
        for j in range(naz):
            dirs.append(Direction(2.0 * math.pi * j / naz, math.acos(xi)))
            weights.append(wi * 2.0 * math.pi / naz)
    return CapsuleArray(tuple(dirs), np.array(weights), order, name=f"gauss-{order}")


# --- text config ------------------------------------------------------------


def _parse_points(doc: dict, source: str) -> tuple[list[Direction], np.ndarray | None]:
    pts = doc.get("points")
    if not isinstance(pts, list) or not pts:
        raise ValueError(f"{source}: 'points' must be a non-empty list")
    dirs, weights = [], []
    for i, p in enumerate(pts):
        if not isinstance(p, (list, tuple)) or len(p) not in (2, 3):
            raise ValueError(f"{source}: points[{i}] must be [azimuth_deg, colatitude_deg(, weight)]")
        dirs.append(Direction(math.radians(float(p[0])), math.radians(float(p[1]))))
        weights.append(float(p[2]) if len(p) == 3 else None)
    if all(w is None for w in weights):
        return dirs, None
    if any(w is None for w in weights):
        raise ValueError(f"{source}: weights must be given for all points or none")
    return dirs, np.array(weights)


def _load_doc(path) -> dict:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping")
    return doc


def load_capsule_array(path) -> CapsuleArray:
    doc = _load_doc(path)
    dirs, w = _parse_points(doc, str(path))
    if w is None:
        w = np.full(len(dirs), FOUR_PI / len(dirs))
    return CapsuleArray(tuple(dirs), w, int(doc["order_limit"]), name=str(doc.get("name", Path(path).stem)))


def load_layout(path, order: int | None = None) -> LoudspeakerLayout:
    doc = _load_doc(path)
    dirs, _ = _parse_points(doc, str(path))
    if order is None:
        order = int(doc["order_limit"])
    return LoudspeakerLayout(tuple(dirs), order, name=str(doc.get("name", Path(path).stem)))


def dump_points(path, directions, name: str, order_limit: int, weights=None) -> None:
    rows = []
    for i, d in enumerate(directions):
        row = [float(math.degrees(d.azimuth)), float(math.degrees(d.colatitude))]
        if weights is not None:
            row.append(float(weights[i]))
        rows.append(row)
    doc = {"name": name, "order_limit": order_limit, "points": rows}
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, default_flow_style=None, sort_keys=False)


BUILTIN_GRIDS = {
    "tdesign-6-36": "tdesign_6_36.yaml",
    "tdesign-6-240": "tdesign_6_240.yaml",
}


def _builtin_path(name: str):
    try:
        fname = BUILTIN_GRIDS[name]
    except KeyError:
        raise ValueError(f"unknown builtin grid {name!r}; choose from {sorted(BUILTIN_GRIDS)}") from None
    return resources.files("hoadapt.ambi") / "data" / fname


def builtin_capsule_array(name: str = "tdesign-6-36") -> CapsuleArray:
    with resources.as_file(_builtin_path(name)) as p:
        return load_capsule_array(p)


def builtin_layout(name: str = "tdesign-6-36", order: int | None = None) -> LoudspeakerLayout:
    with resources.as_file(_builtin_path(name)) as p:
        return load_layout(p, order)
