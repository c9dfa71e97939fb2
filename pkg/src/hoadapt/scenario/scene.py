"""Sound scenes: builtin test signals, source trajectories and SH-domain mixing."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy import signal as sps

from ..ambi.encoding import SourceSignal, encode_plane_wave
from ..ambi.sh import Direction, channel_count
from .audio import read_audio
from .config import ConfigError, ScenarioConfig, SignalSpec, TrajectorySpec


def _wrap_deg(az: np.ndarray) -> np.ndarray:
    return np.mod(np.asarray(az, dtype=float) + 180.0, 360.0) - 180.0


def listener_to_sphere(azimuth_deg, elevation_deg) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (azimuth, elevation) degrees -> (azimuth, colatitude) radians.

    Elevations beyond +/-90 continue over the pole and flip the azimuth by 180.
    """
    az = np.asarray(azimuth_deg, dtype=float)
    el = np.asarray(elevation_deg, dtype=float)
    over = el > 90.0
    under = el < -90.0
    colat = np.where(over, el - 90.0, np.where(under, 270.0 + el, 90.0 - el))
    az = np.where(over | under, az + 180.0, az)
    return np.radians(_wrap_deg(az)), np.radians(colat)


class SweepTrajectory:
    """Linear sweep of one angle over `duration` seconds, then held at the end.

    The fraction at sample i is i / (duration * fs), clamped to 1, and the
    angle is (1 - f) * start + f * stop so both endpoints come out exact.
    """

    def __init__(self, kind: str, start: float, stop: float, duration: float, sample_rate: int, fixed: float = 0.0):
        if kind not in ("azimuth_sweep", "elevation_sweep"):
            raise ValueError(f"unknown sweep {kind!r}")
        self.kind = kind
        self.start = start
        self.stop = stop
        self.span = duration * sample_rate
        self.fixed = fixed

    def degrees(self, indices) -> tuple[np.ndarray, np.ndarray]:
        """(azimuth, elevation) in degrees at the given sample indices."""
        f = np.minimum(np.asarray(indices, dtype=float) / self.span, 1.0)
        moving = (1.0 - f) * self.start + f * self.stop
        fixed = np.full_like(moving, self.fixed)
        return (moving, fixed) if self.kind == "azimuth_sweep" else (fixed, moving)

    def angles(self, indices) -> tuple[np.ndarray, np.ndarray]:
        return listener_to_sphere(*self.degrees(indices))

    def __call__(self, index: int) -> Direction:
        az, el = self.degrees(np.array([index]))
        return Direction.from_degrees(float(az[0]), float(el[0]))


class FixedTrajectory:
    def __init__(self, azimuth: float, elevation: float):
        self.azimuth = azimuth
        self.elevation = elevation
        self.direction = Direction.from_degrees(azimuth, elevation)

    def degrees(self, indices) -> tuple[np.ndarray, np.ndarray]:
        n = len(np.atleast_1d(indices))
        return np.full(n, self.azimuth), np.full(n, self.elevation)

    def angles(self, indices) -> tuple[np.ndarray, np.ndarray]:
        n = len(np.atleast_1d(indices))
        return np.full(n, self.direction.azimuth), np.full(n, self.direction.colatitude)

    def __call__(self, index: int) -> Direction:
        return self.direction


def make_trajectory(spec: TrajectorySpec, sample_rate: int):
    if spec.kind == "static":
        return FixedTrajectory(spec.azimuth, spec.elevation)
    fixed = spec.elevation if spec.kind == "azimuth_sweep" else spec.azimuth
    return SweepTrajectory(spec.kind, spec.start, spec.stop, spec.duration, sample_rate, fixed)


# --- builtin signals --------------------------------------------------------------------


def sine(n: int, fs: int, frequency: float, amplitude: float) -> np.ndarray:
    return amplitude * np.sin(2 * np.pi * frequency * np.arange(n) / fs)


def noise_burst(n: int, fs: int, amplitude: float, band, burst_length: float, burst_period: float,
                rng: np.random.Generator) -> np.ndarray:
    """Band-passed white noise gated into bursts with 5 ms raised-cosine ramps."""
    hi = min(band[1], 0.45 * fs)
    sos = sps.butter(4, [band[0], hi], btype="bandpass", fs=fs, output="sos")
    x = sps.sosfilt(sos, rng.standard_normal(n))
    t = np.arange(n) / fs
    phase = np.mod(t, burst_period)
    ramp = max(min(0.005, burst_length / 2), 1.0 / fs)
    gate = np.clip(np.minimum(phase, burst_length - phase) / ramp, 0.0, 1.0)
    gate = np.where(phase < burst_length, 0.5 - 0.5 * np.cos(np.pi * gate), 0.0)
    y = gate * x
    peak = np.max(np.abs(y)) or 1.0
    return amplitude * y / peak


def exp_sweep(n: int, fs: int, f0: float, f1: float, amplitude: float) -> np.ndarray:
    """Exponential sine sweep from f0 to f1 over the whole signal."""
    t = np.arange(n) / fs
    length = n / fs
    if f1 == f0:
        return sine(n, fs, f0, amplitude)
    k = length / math.log(f1 / f0)
    return amplitude * np.sin(2 * np.pi * f0 * k * (np.exp(t / k) - 1.0))


def source_samples(spec: SignalSpec, n: int, fs: int, rng: np.random.Generator, base_dir: Path, path: str) -> np.ndarray:
    if spec.builtin == "sine":
        return sine(n, fs, spec.frequency, spec.amplitude)
    if spec.builtin == "noise_burst":
        return noise_burst(n, fs, spec.amplitude, spec.band, spec.burst_length, spec.burst_period, rng)
    if spec.builtin == "exp_sweep":
        return exp_sweep(n, fs, spec.start_frequency, min(spec.stop_frequency, fs / 2), spec.amplitude)
    file = spec.file if spec.file.is_absolute() else base_dir / spec.file
    if not file.is_file():
        raise ConfigError(f"{path}.file", f"missing file {file}")
    try:
        data, rate = read_audio(file)
    except ValueError as exc:
        raise ConfigError(f"{path}.file", f"unsupported format: {exc}") from exc
    if data.shape[0] != 1:
        raise ConfigError(f"{path}.file", f"unsupported format: expected mono, got {data.shape[0]} channels")
    if rate != fs:
        raise ConfigError(f"{path}.file", f"unsupported format: sample rate {rate} != {fs}")
    x = data[0, :n]
    return np.pad(x, (0, n - len(x)))


def build_scene(config: ScenarioConfig) -> list[SourceSignal]:
    """One SourceSignal per configured source, all exactly `duration` long.

    Noise sources draw from Philox streams spawned off the scene seed, one
    per source index.
    """
    n = config.total_samples
    streams = np.random.SeedSequence(config.seed).spawn(len(config.sources))
    out = []
    for i, (src, seq) in enumerate(zip(config.sources, streams)):
        rng = np.random.Generator(np.random.Philox(seq))
        x = source_samples(src.signal, n, config.sample_rate, rng, config.base_dir, f"sources[{i}].signal")
        out.append(SourceSignal(x, config.sample_rate, make_trajectory(src.trajectory, config.sample_rate), src.name))
    return out


def scene_coefficients(sources: list[SourceSignal], order: int) -> np.ndarray:
    """Sum of the per-source plane-wave encodings (C x T)."""
    total = None
    for s in sources:
        a = encode_plane_wave(s, order).samples
        total = a if total is None else total + a
    if total is None:
        return np.zeros((channel_count(order), 0))
    return total
