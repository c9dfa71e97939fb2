"""Deterministic sender -> link -> receiver simulation.

One scheduler drives both state machines. Sender tick ``k`` fires at
``(k + 1) * packet_interval``, when frame ``k`` has been fully captured. Before each
tick the link deliveries and receiver playout slots that fall due are
processed in time order, deliveries first on ties.

The sender's bandwidth measurement is read from the link by a probe over
each estimation window. The feedback path is treated as ideal, so the
probe is evaluated as soon as the window closes.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..ambi.frames import AmbisonicFrame
from ..ambi.sh import channel_count
from ..netsim import Link, LinkConfig, to_ns
from ..wire import FLAG_FADE_ACTIVE, SEQ_MOD, WirePacket, encapsulate, payload_size
from .controller import AdaptationConfig, AdaptationController, adaptation_tick
from .estimator import BandwidthEstimate
from .events import TraceRow, sort_rows
from .jitter import ReceivedFrame, Receiver, stack_frames

log = logging.getLogger(__name__)

# bits available over [t0, t1)
Probe = Callable[[float, float], float]

_EPS = 1e-9


@dataclass
class SessionConfig:
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    jitter_depth: int = 4
    forced_order: int | None = None
    overflow: str = "clamp"

    @property
    def render_order(self) -> int:
        return self.adaptation.max_order if self.forced_order is None else self.forced_order


@dataclass
class PacketLogEntry:
    seq: int
    time: float
    order: int
    size: int
    estimate: float | None
    fading: bool
    starved: bool
    hold_pending: bool
    dropped: str | None = None


@dataclass
class SessionResult:
    received: np.ndarray
    frames: list[ReceivedFrame]
    trace: list[TraceRow]
    packets: list[PacketLogEntry]
    capture: list[tuple[int, bytes]]
    counters: Counter
    render_order: int
    link: Link

    @property
    def concealed(self) -> int:
        return sum(f.concealed for f in self.frames)

    @property
    def sent_orders(self) -> np.ndarray:
        return np.array([p.order for p in self.packets])


class Sender:
    def __init__(self, config: SessionConfig, link: Link, probe: Probe | None = None):
        self.config = config
        self.link = link
        self.probe = probe or link.available_bits
        adapt = config.adaptation
        if config.forced_order is not None:
            adapt = replace(adapt, enabled=False)
        self.controller = AdaptationController(adapt, initial_order=config.render_order)
        self.estimator = BandwidthEstimate(adapt.window)
        self.counters = Counter()
        self.packets: list[PacketLogEntry] = []
        self.capture: list[tuple[int, bytes]] = []
        self.seq = 0

    def _measure(self, now: float) -> list[TraceRow]:
        rows = []
        est = self.estimator
        while est.window_end <= now + _EPS:
            w0, w1 = est.window_start, est.window_end
            est.update(self.probe(w0, w1), w0)
            for end, value in est.update(0.0, w1):
                rows.append(TraceRow(to_ns(end), "bandwidth_estimate", order=self.controller.state.current_order,
                                     bandwidth_bps=int(round(value))))
        return rows

    def tick(self, frame: AmbisonicFrame, now: float) -> tuple[WirePacket, list[TraceRow]]:
        cfg = self.config.adaptation
        ctl = self.controller
        rows = self._measure(now)
        for ev in adaptation_tick(ctl, self.estimator, now):
            rows.append(TraceRow(to_ns(now), ev, order=ctl.state.pending_order))
        out = ctl.prepare(frame)
        seq = self.seq % SEQ_MOD
        packet = encapsulate(out.frame, seq, out.fade_remaining, out.flags, cfg.bit_depth,
                             self.config.overflow, self.counters)
        data = packet.serialize()
        rec = self.link.submit(data, now)
        self.capture.append((to_ns(now), data))
        estimate = ctl.state.latest_estimate
        bw = None if estimate is None else int(round(estimate))
        queued = self.link.queued_bytes(now)
        order = out.frame.order
        for ev in out.events:
            if ev == "order_changed":
                rows.append(TraceRow(to_ns(now), ev, seq, order, bw, queued))
        rows.append(TraceRow(to_ns(now), "packet_sent", seq, order, bw, queued))
        for ev in out.events:
            if ev == "fade_completed":
                rows.append(TraceRow(to_ns(now), ev, seq, ctl.state.current_order))
        if rec.dropped is not None:
            t_drop = rec.departure_time if rec.departure_time is not None else now
            rows.append(TraceRow(to_ns(t_drop), "packet_lost", seq, order, bw, queued))
            self.counters[rec.dropped.value] += 1
        self.counters["sent"] += 1
        supported = ctl.state.supported_order
        self.packets.append(PacketLogEntry(
            seq=self.seq, time=now, order=order, size=len(data), estimate=estimate,
            fading=bool(out.flags & FLAG_FADE_ACTIVE), starved=ctl.state.starved,
            hold_pending=supported is not None and supported > order,
            dropped=None if rec.dropped is None else rec.dropped.value,
        ))
        self.seq += 1
        return packet, rows


def sender_tick(sender: Sender, frame: AmbisonicFrame, now: float) -> tuple[WirePacket, list[TraceRow]]:
    return sender.tick(frame, now)


def run_session(signal: np.ndarray, config: SessionConfig, probe: Probe | None = None,
                sample_rate: int = 48000) -> SessionResult:
    """Stream a full-order coefficient signal (C x T) through the adaptive chain.

    The signal is cut into frames of ``frame_length`` samples, zero-padding
    the tail. Returns the receiver's playout stream at the render order.
    """
    adapt = config.adaptation
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 2 or signal.shape[0] != channel_count(adapt.max_order):
        raise ValueError(f"signal must have {channel_count(adapt.max_order)} rows, got {signal.shape}")
    if adapt.sample_rate != sample_rate:
        raise ValueError("adaptation sample_rate disagrees with the session sample rate")
    length = adapt.frame_length
    n_frames = math.ceil(signal.shape[1] / length)
    if signal.shape[1] != n_frames * length:
        signal = np.pad(signal, ((0, 0), (0, n_frames * length - signal.shape[1])))
    period = length / sample_rate

    link = Link(config.link)
    sender = Sender(config, link, probe)
    receiver = Receiver(config.render_order, length, sample_rate, config.jitter_depth)
    rows: list[TraceRow] = []
    frames: list[ReceivedFrame] = []

    def play(now=None):
        f = receiver.play(now)
        frames.append(f)
        if f.concealed:
            rows.append(TraceRow(to_ns(f.time), "conceal", f.seq % SEQ_MOD))

    def advance(until: float) -> None:
        while True:
            td = link.next_delivery_time()
            tp = receiver.next_pop_time() if len(frames) < n_frames else None
            if td is not None and td <= until and (tp is None or td <= tp):
                for d in link.deliveries(td):
                    receiver.receive(d.data, d.time)
            elif tp is not None and tp <= until:
                play()
            else:
                return

    for k in range(n_frames):
        now = (k + 1) * period
        advance(now)
        frame = AmbisonicFrame(adapt.max_order, signal[:, k * length:(k + 1) * length], sample_rate, k * length)
        _, tick_rows = sender.tick(frame, now)
        rows += tick_rows
    advance(math.inf)
    # nothing ever arrived, so there is no playout clock: conceal the rest
    end = n_frames * period
    while len(frames) < n_frames:
        play(end)

    counters = sender.counters + receiver.stats
    result = SessionResult(
        received=stack_frames(frames),
        frames=frames,
        trace=sort_rows(rows),
        packets=sender.packets,
        capture=sender.capture,
        counters=counters,
        render_order=config.render_order,
        link=link,
    )
    log.info("session: %d frames, %d concealed, %d lost in transit",
             n_frames, result.concealed, sum(p.dropped is not None for p in sender.packets))
    return result


def order_budget_violations(packets: list[PacketLogEntry], config: AdaptationConfig) -> list[PacketLogEntry]:
    """Packets sent below threshold that break the order-selection rule.

    Fading packets still carry the old order by design, starved packets
    hold order 0 over budget, and a packet whose next order is already
    affordable is fine while an up-step hold is pending.
    """
    bad = []
    packet_interval = config.packet_interval
    for p in packets:
        if p.estimate is None or p.estimate >= config.threshold_bps or p.fading or p.starved:
            continue
        budget = p.estimate * packet_interval
        fits = payload_size(p.order, config.bit_depth, config.frame_length) <= budget
        maximal = (p.order >= config.max_order or p.hold_pending
                   or payload_size(p.order + 1, config.bit_depth, config.frame_length) > budget)
        if not (fits and maximal):
            bad.append(p)
    return bad
