from __future__ import annotations

from dataclasses import dataclass

EVENT_KINDS = (
    "packet_sent",
    "packet_lost",
    "order_changed",
    "fade_started",
    "fade_completed",
    "conceal",
    "bandwidth_estimate",
)

TRACE_FIELDS = ("time_ns", "event", "seq", "order", "bandwidth_bps", "queue_bytes")


@dataclass(frozen=True)
class TraceRow:
    """One line of the session trace. Fields that do not apply stay None."""

    time_ns: int
    event: str
    seq: int | None = None
    order: int | None = None
    bandwidth_bps: int | None = None
    queue_bytes: int | None = None

    def __post_init__(self):
        if self.event not in EVENT_KINDS:
            raise ValueError(f"unknown trace event {self.event!r}")

    def fields(self) -> list[str]:
        return ["" if v is None else str(v) for v in (self.time_ns, self.event, self.seq, self.order, self.bandwidth_bps, self.queue_bytes)]


def sort_rows(rows: list[TraceRow]) -> list[TraceRow]:
    # stable: rows logged at the same instant keep their causal order
    return sorted(rows, key=lambda r: r.time_ns)
