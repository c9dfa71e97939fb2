"""Deterministic model of a bandwidth-limited simplex link.

A single drop-tail FIFO with a byte limit feeds a serializer whose rate is
the capacity in force when the packet is admitted. Delivered packets arrive
after a fixed propagation delay plus a rectified normal jitter draw; an
independent Bernoulli draw may lose a packet in transit.

Random numbers come from two Philox4x64 counter-based streams spawned from
``SeedSequence(rng_seed)``: stream 0 decides losses, stream 1 jitter. Both
draws are taken for every submitted packet, in submission order, so the loss
pattern does not depend on queue state.
"""

from __future__ import annotations

import bisect
import csv
import enum
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ClockRegression(ValueError):
    pass


class DropReason(str, enum.Enum):
    QUEUE_OVERFLOW = "queue_overflow"
    RANDOM_LOSS = "random_loss"


@dataclass
class LinkConfig:
    capacity_bps: float = 13e6
    queue_limit: int = 64 * 1024
    propagation_delay: float = 0.020
    jitter_stddev: float = 0.0
    loss_probability: float = 0.0
    rng_seed: int = 0
    schedule: Sequence[tuple[float, float]] = ()

    def __post_init__(self):
        if not self.capacity_bps > 0:
            raise ValueError("capacity_bps must be positive")
        if self.queue_limit < 0:
            raise ValueError("queue_limit must be >= 0")
        if self.propagation_delay < 0 or self.jitter_stddev < 0:
            raise ValueError("delays must be >= 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")
        check_schedule(self.schedule)


def check_schedule(schedule) -> list[tuple[float, float]]:
    steps = [(float(t), float(c)) for t, c in schedule]
    for i, (t, c) in enumerate(steps):
        if not c > 0:
            raise ValueError(f"schedule[{i}]: capacity must be positive")
        if i and not t > steps[i - 1][0]:
            raise ValueError(f"schedule[{i}]: times must be strictly increasing")
    return steps


@dataclass
class InFlightPacket:
    index: int
    size: int
    enqueue_time: float
    departure_time: float | None = None
    delivery_time: float | None = None
    dropped: DropReason | None = None
    data: bytes = field(default=b"", repr=False)

    @property
    def delivered(self) -> bool:
        return self.dropped is None


@dataclass(frozen=True)
class Delivery:
    time: float
    data: bytes
    index: int


def to_ns(t: float) -> int:
    return int(round(t * 1e9))


class Link:
    def __init__(self, config: LinkConfig):
        self.config = config
        self._steps: list[tuple[float, float]] = []
        self.set_capacity_schedule(config.schedule)
        loss_seq, jitter_seq = np.random.SeedSequence(config.rng_seed).spawn(2)
        self._loss_rng = np.random.Generator(np.random.Philox(loss_seq))
        self._jitter_rng = np.random.Generator(np.random.Philox(jitter_seq))
        self._clock = -math.inf
        self._last_departure = -math.inf
        self._queue: deque[tuple[float, int]] = deque()
        self._queued_bytes = 0
        self._pending: list[tuple[float, int, bytes]] = []
        # FIFO service intervals, non-overlapping and sorted
        self._svc_start: list[float] = []
        self._svc_end: list[float] = []
        self._svc_bits: list[int] = []
        self.records: list[InFlightPacket] = []

    # --- capacity ---------------------------------------------------------------

    def set_capacity_schedule(self, schedule) -> None:
        """Right-continuous steps; the nominal capacity holds before the first."""
        self._steps = check_schedule(schedule)
        self._step_times = [t for t, _ in self._steps]

    def capacity(self, t: float) -> float:
        i = bisect.bisect_right(self._step_times, t)
        return self.config.capacity_bps if i == 0 else self._steps[i - 1][1]

    def capacity_integral(self, t0: float, t1: float) -> float:
        """Bits the link could carry over [t0, t1)."""
        if t1 <= t0:
            return 0.0
        edges = [t0] + [t for t in self._step_times if t0 < t < t1] + [t1]
        return sum(self.capacity(a) * (b - a) for a, b in zip(edges, edges[1:]))

    # --- queue --------------------------------------------------------------------

    def _advance(self, now: float) -> None:
        while self._queue and self._queue[0][0] <= now:
            self._queued_bytes -= self._queue.popleft()[1]

    def queued_bytes(self, now: float) -> int:
        self._advance(now)
        return self._queued_bytes

    def submit(self, data: bytes, now: float) -> InFlightPacket:
        if now < self._clock:
            raise ClockRegression(f"submit at {now} after {self._clock}")
        self._clock = now
        u = self._loss_rng.random()
        z = self._jitter_rng.standard_normal()
        size = len(data)
        rec = InFlightPacket(len(self.records), size, now, data=bytes(data))
        self.records.append(rec)
        self._advance(now)
        if self._queued_bytes + size > self.config.queue_limit:
            rec.dropped = DropReason.QUEUE_OVERFLOW
            return rec
        start = max(now, self._last_departure)
        dep = start + size * 8 / self.capacity(now)
        self._last_departure = dep
        self._queue.append((dep, size))
        self._queued_bytes += size
        self._svc_start.append(start)
        self._svc_end.append(dep)
        self._svc_bits.append(size * 8)
        rec.departure_time = dep
        if u < self.config.loss_probability:
            rec.dropped = DropReason.RANDOM_LOSS
            return rec
        rec.delivery_time = dep + self.config.propagation_delay + max(0.0, self.config.jitter_stddev * z)
        heapq.heappush(self._pending, (rec.delivery_time, rec.index, rec.data))
        return rec

    def deliveries(self, until: float) -> list[Delivery]:
        """Pop every packet delivered at or before `until`, in delivery order."""
        out = []
        while self._pending and self._pending[0][0] <= until:
            t, idx, data = heapq.heappop(self._pending)
            out.append(Delivery(t, data, idx))
        return out

    def next_delivery_time(self) -> float | None:
        return self._pending[0][0] if self._pending else None

    @property
    def in_flight(self) -> int:
        return len(self._pending)

    # --- monitoring -----------------------------------------------------------------

    def available_bits(self, t0: float, t1: float) -> float:
        """Bits served plus spare capacity over [t0, t1).

        Idealized available-bandwidth probe: busy time is credited with the
        rate packets were actually serialized at, idle time with the
        scheduled capacity. Only meaningful for t1 up to the last submit.
        """
        if t1 <= t0:
            return 0.0
        i = bisect.bisect_right(self._svc_end, t0)
        served = 0.0
        idle = 0.0
        cursor = t0
        while i < len(self._svc_start) and self._svc_start[i] < t1:
            s, e, bits = self._svc_start[i], self._svc_end[i], self._svc_bits[i]
            if s > cursor:
                idle += self.capacity_integral(cursor, s)
            if e > s:
                served += bits * (min(e, t1) - max(s, t0)) / (e - s)
            cursor = max(cursor, min(e, t1))
            i += 1
        if cursor < t1:
            idle += self.capacity_integral(cursor, t1)
        return served + idle

    # --- trace ----------------------------------------------------------------------

    def events(self) -> list[tuple[int, str, int, int, str]]:
        rows = []
        for r in self.records:
            rows.append((to_ns(r.enqueue_time), "submit", r.index, r.size, ""))
            if r.dropped is DropReason.QUEUE_OVERFLOW:
                rows.append((to_ns(r.enqueue_time), "drop", r.index, r.size, r.dropped.value))
                continue
            rows.append((to_ns(r.departure_time), "depart", r.index, r.size, ""))
            if r.dropped is DropReason.RANDOM_LOSS:
                rows.append((to_ns(r.departure_time), "drop", r.index, r.size, r.dropped.value))
            else:
                rows.append((to_ns(r.delivery_time), "deliver", r.index, r.size, ""))
        order = {"submit": 0, "depart": 1, "drop": 2, "deliver": 3}
        rows.sort(key=lambda row: (row[0], row[2], order[row[1]]))
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_ns", "event", "packet", "bytes", "reason"])
            w.writerows(self.events())
