from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frames import AmbisonicFrame, OrderError, ShapeError
from .grids import CapsuleArray
from .sh import Direction, sh_matrix


class StaticTrajectory:
    def __init__(self, direction: Direction):
        self.direction = direction

    def __call__(self, index: int) -> Direction:
        return self.direction

    def angles(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(indices)
        return np.full(n, self.direction.azimuth), np.full(n, self.direction.colatitude)


def trajectory_angles(trajectory: Callable[[int], Direction], indices: np.ndarray):
    """(azimuth, colatitude) arrays for the given sample indices."""
    fast = getattr(trajectory, "angles", None)
    if fast is not None:
        return fast(indices)
    dirs = [trajectory(int(i)) for i in indices]
    return np.array([d.azimuth for d in dirs]), np.array([d.colatitude for d in dirs])


@dataclass(frozen=True, eq=False)
class SourceSignal:
    samples: np.ndarray
    sample_rate: int
    trajectory: Callable[[int], Direction]
    name: str = "source"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ShapeError("source samples must be one-dimensional")
        if np.any(np.abs(s) > 1.0):
            raise ValueError(f"{self.name}: samples exceed full scale")
        object.__setattr__(self, "samples", s)
        if isinstance(self.trajectory, Direction):
            object.__setattr__(self, "trajectory", StaticTrajectory(self.trajectory))

    def __len__(self):
        return len(self.samples)


def encode_plane_wave(source: SourceSignal, order: int, start: int = 0, length: int | None = None) -> AmbisonicFrame:
    """Far-field point source encoding, direction evaluated per sample."""
    if length is None:
        length = len(source) - start
    if start < 0 or length < 1 or start + length > len(source):
        raise IndexError(f"window [{start}, {start + length}) outside source of length {len(source)}")
    idx = np.arange(start, start + length)
    az, colat = trajectory_angles(source.trajectory, idx)
    Y = sh_matrix(order, az, colat)
    return AmbisonicFrame(order, (Y * source.samples[idx, None]).T, source.sample_rate, start)


def encode_capsules(
    pressures: np.ndarray, array: CapsuleArray, order: int, sample_rate: int = 48000, start_index: int = 0
) -> AmbisonicFrame:
    """Discrete SH transform of capsule pressures (open array, unit radial gain)."""
    if order > array.order_limit:
        raise OrderError(f"array supports order <= {array.order_limit}, asked for {order}")
    p = np.asarray(pressures, dtype=float)
    if p.ndim != 2 or p.shape[0] != array.count:
        raise ShapeError(f"expected {array.count} capsule rows, got shape {p.shape}")
    Yw = array.sh_matrix(order) * array.weights[:, None]
    return AmbisonicFrame(order, Yw.T @ p, sample_rate, start_index)


def plane_wave_pressures(signal: np.ndarray, direction: Direction, array: CapsuleArray) -> np.ndarray:
    """Capsule pressures of an order-limited plane wave (order = array.order_limit).

    The field is the band-limited directional impulse
    p(x, t) = s(t) * sum_nm Y_nm(direction) Y_nm(x), so an exact quadrature
    recovers s(t) * Y_nm(direction) for every n up to the array limit.
    """
    N = array.order_limit
    y_src = sh_matrix(N, direction.azimuth, direction.colatitude)
    gains = array.sh_matrix(N) @ y_src
    return np.outer(gains, np.asarray(signal, dtype=float))
