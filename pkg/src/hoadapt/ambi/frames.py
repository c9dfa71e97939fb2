from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sh import channel_count


class OrderError(ValueError):
    """Requested Ambisonics order is not available."""


class ShapeError(ValueError):
    """Matrix dimensions do not line up."""


@dataclass(frozen=True, eq=False)
class AmbisonicFrame:
    """One packetized window of SH coefficients, rows in ACN order."""

    order: int
    samples: np.ndarray
    sample_rate: int = 48000
    start_index: int = 0

    def __post_init__(self):
        if self.order < 0:
            raise OrderError(f"negative order {self.order}")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] != channel_count(self.order):
            raise ShapeError(
                f"order {self.order} needs {channel_count(self.order)} rows, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("frame contains non-finite values")
        object.__setattr__(self, "samples", samples)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def frame_length(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray, order: int | None = None) -> "AmbisonicFrame":
        return replace(self, samples=samples, order=self.order if order is None else order)


def zeros(order: int, frame_length: int, sample_rate: int = 48000, start_index: int = 0) -> AmbisonicFrame:
    return AmbisonicFrame(order, np.zeros((channel_count(order), frame_length)), sample_rate, start_index)


def truncate_order(frame: AmbisonicFrame, new_order: int) -> AmbisonicFrame:
    if not 0 <= new_order <= frame.order:
        raise OrderError(f"cannot truncate order {frame.order} frame to {new_order}")
    if new_order == frame.order:
        return frame
    return frame.with_samples(frame.samples[: channel_count(new_order)].copy(), new_order)


def zero_pad(frame: AmbisonicFrame, order: int) -> AmbisonicFrame:
    """Extend a frame with silent high-order channels."""
    if order < frame.order:
        raise OrderError(f"cannot pad order {frame.order} frame down to {order}")
    if order == frame.order:
        return frame
    out = np.zeros((channel_count(order), frame.frame_length))
    out[: frame.channel_count] = frame.samples
    return frame.with_samples(out, order)


def high_order_residual(frame: AmbisonicFrame, low_order: int) -> AmbisonicFrame:
    """Channels above `low_order`, with everything at or below it zeroed."""
    if not 0 <= low_order <= frame.order:
        raise OrderError(f"residual order {low_order} outside [0, {frame.order}]")
    out = frame.samples.copy()
    out[: channel_count(low_order)] = 0.0
    return frame.with_samples(out)
