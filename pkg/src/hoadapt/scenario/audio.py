"""Multichannel PCM WAV files via the stdlib ``wave`` module."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from ..wire import pcm_to_float, quantize

_WIDTH = {16: 2, 24: 3, 32: 4}


def write_audio(samples: np.ndarray, path, sample_rate: int = 48000, bit_depth: int = 16) -> int:
    """Write a channels x frames matrix as interleaved little-endian PCM.

    Values are quantized like the wire payload (round half away from zero,
    clamped at full scale). Returns the number of clamped samples.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("audio needs a (channels, frames) matrix with at least one channel")
    if bit_depth not in _WIDTH:
        raise ValueError(f"unsupported bit depth {bit_depth}")
    words, clamped = quantize(x, bit_depth)
    width = _WIDTH[bit_depth]
    inter = np.ascontiguousarray(words.T, dtype="<i4")
    if width == 2:
        raw = inter.astype("<i2").tobytes()
    elif width == 4:
        raw = inter.tobytes()
    else:
        raw = inter.view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    with wave.open(str(path), "wb") as w:
        w.setnchannels(x.shape[0])
        w.setsampwidth(width)
        w.setframerate(sample_rate)
        w.writeframes(raw)
    return clamped


def read_audio(path) -> tuple[np.ndarray, int]:
    """Read a PCM WAV as (channels x frames floats in [-1, 1), sample_rate)."""
    try:
        with wave.open(str(Path(path)), "rb") as w:
            channels, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            raw = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise ValueError(str(exc)) from exc
    if width == 1:
        words = np.frombuffer(raw, dtype=np.uint8).astype(np.int64) - 128
        bits = 8
    elif width in (2, 4):
        words = np.frombuffer(raw, dtype=f"<i{width}").astype(np.int64)
        bits = 8 * width
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        words = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        words = np.where(words >= 1 << 23, words - (1 << 24), words)
        bits = 24
    else:
        raise ValueError(f"unsupported sample width {width}")
    data = words.reshape(-1, channels).T
    return pcm_to_float(data, bits) if bits != 8 else data / 128.0, rate
