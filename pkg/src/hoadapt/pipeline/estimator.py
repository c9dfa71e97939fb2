from __future__ import annotations

from collections import deque

from ..netsim import ClockRegression

# window boundaries are compared with this slack so that float clocks
# landing a hair under a boundary still close the window
_EPS = 1e-9


class BandwidthEstimate:
    """Windowed throughput meter: bits received in each fixed window divided by its length."""

    def __init__(self, window: float = 0.1, start: float = 0.0, history: int = 64):
        if not window > 0:
            raise ValueError("window must be positive")
        self.window = window
        self.start = start
        self._index = 0
        self.received_bits = 0.0
        self.estimate: float | None = None
        self.history: deque[tuple[float, float]] = deque(maxlen=history)
        self.published = 0
        self._clock = start

    @property
    def window_start(self) -> float:
        return self.start + self._index * self.window

    @property
    def window_end(self) -> float:
        return self.start + (self._index + 1) * self.window

    def update(self, bits: float, now: float) -> list[tuple[float, float]]:
        """Account `bits` received at `now`; returns (window_end, estimate_bps) for each window closed."""
        if now < self._clock - _EPS:
            raise ClockRegression(f"estimator clock went from {self._clock} to {now}")
        self._clock = max(self._clock, now)
        closed = []
        while now >= self.window_end - _EPS:
            end = self.window_end
            self.estimate = self.received_bits / self.window
            self.history.append((end, self.estimate))
            self.published += 1
            closed.append((end, self.estimate))
            self.received_bits = 0.0
            self._index += 1
        self.received_bits += bits
        return closed


def update_bandwidth(est: BandwidthEstimate, bits: float, now: float) -> BandwidthEstimate:
    est.update(bits, now)
    return est
