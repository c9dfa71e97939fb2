"""Receiver side: time-driven jitter buffer and frame reconstruction."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..ambi.frames import AmbisonicFrame, zero_pad, zeros
from ..wire import FLAG_FADE_ACTIVE, SEQ_MOD, MalformedPacket, WirePacket, dequantize, parse_packet

log = logging.getLogger(__name__)


@dataclass
class Popped:
    seq: int  # extended (unwrapped) sequence number
    time: float
    packet: WirePacket | None

    @property
    def concealed(self) -> bool:
        return self.packet is None


class JitterBuffer:
    """Fixed-delay playout buffer.

    The playout clock is anchored on the first arrival: sequence ``s`` plays
    at ``origin + s * period`` where the origin places the first arrival
    ``depth`` frames ahead of its own slot. A packet that shows up after its
    slot was played is late and dropped; a slot with nothing in it is
    concealed exactly once.
    """

    def __init__(self, period: float, depth: int = 4, first_seq: int = 0):
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.period = period
        self.depth = depth
        self.first_seq = first_seq
        self.next_seq = first_seq
        self.origin: float | None = None
        self.slots: dict[int, WirePacket] = {}
        self._highest = first_seq - 1
        self.stats = Counter()

    def _extend(self, seq16: int) -> int:
        # serial arithmetic relative to the highest extended seq seen so far
        ref = max(self._highest, self.next_seq)
        base = ref - (ref % SEQ_MOD) + seq16
        if base - ref > SEQ_MOD // 2:
            base -= SEQ_MOD
        elif ref - base >= SEQ_MOD // 2:
            base += SEQ_MOD
        return base

    def playout_time(self, seq: int) -> float | None:
        if self.origin is None:
            return None
        return self.origin + (seq - self.first_seq) * self.period

    def push(self, packet: WirePacket, now: float) -> str:
        """Insert a packet; returns 'accepted', 'late' or 'duplicate'."""
        ext = self._extend(packet.header.sequence)
        if self.origin is None:
            self.origin = now - (ext - self.first_seq) * self.period + self.depth * self.period
        if ext < self.next_seq:
            self.stats["late"] += 1
            return "late"
        if ext in self.slots:
            self.stats["duplicate"] += 1
            return "duplicate"
        self.slots[ext] = packet
        self._highest = max(self._highest, ext)
        self.stats["accepted"] += 1
        return "accepted"

    def next_pop_time(self) -> float | None:
        return self.playout_time(self.next_seq)

    def pop(self, now: float | None = None) -> Popped:
        seq = self.next_seq
        t = self.playout_time(seq) if now is None else now
        packet = self.slots.pop(seq, None)
        self.next_seq += 1
        self.stats["popped"] += 1
        if packet is None:
            self.stats["concealed"] += 1
        return Popped(seq, t, packet)


@dataclass
class ReceivedFrame:
    seq: int
    time: float
    frame: AmbisonicFrame
    order: int | None  # header order, None when concealed
    fade_remaining: int = 0
    fading: bool = False

    @property
    def concealed(self) -> bool:
        return self.order is None


def receiver_reconstruct(popped: Popped, render_order: int, frame_length: int, sample_rate: int = 48000) -> ReceivedFrame:
    """Turn a popped slot into a frame at the session order.

    The fade gain is applied to the high channels before quantization, so
    a faded packet already holds the low-order part plus the attenuated
    residual; zero-padding it is the whole reconstruction. A concealed slot
    becomes silence, residual included.
    """
    start = popped.seq * frame_length
    if popped.packet is None:
        return ReceivedFrame(popped.seq, popped.time, zeros(render_order, frame_length, sample_rate, start), None)
    h = popped.packet.header
    frame = dequantize(popped.packet, sample_rate)
    frame = zero_pad(frame, max(render_order, frame.order))
    if frame.order > render_order:
        frame = frame.with_samples(frame.samples[: (render_order + 1) ** 2], render_order)
    return ReceivedFrame(popped.seq, popped.time, frame, h.order, h.fade_remaining, bool(h.flags & FLAG_FADE_ACTIVE))


class Receiver:
    """Parses arriving datagrams into a jitter buffer and plays them out."""

    def __init__(self, render_order: int, frame_length: int, sample_rate: int = 48000, depth: int = 4):
        self.render_order = render_order
        self.frame_length = frame_length
        self.sample_rate = sample_rate
        self.buffer = JitterBuffer(frame_length / sample_rate, depth)
        self.stats = Counter()

    def receive(self, data: bytes, now: float) -> str:
        try:
            packet = parse_packet(data)
        except MalformedPacket as exc:
            self.stats["malformed"] += 1
            self.stats[f"malformed_{exc.reason}"] += 1
            log.debug("dropping malformed datagram: %s", exc.reason)
            return "malformed"
        status = self.buffer.push(packet, now)
        self.stats[status] += 1
        return status

    def next_pop_time(self) -> float | None:
        return self.buffer.next_pop_time()

    def play(self, now: float | None = None) -> ReceivedFrame:
        out = receiver_reconstruct(self.buffer.pop(now), self.render_order, self.frame_length, self.sample_rate)
        if out.concealed:
            self.stats["concealed"] += 1
        return out


def stack_frames(frames: list[ReceivedFrame]) -> np.ndarray:
    if not frames:
        return np.zeros((0, 0))
    return np.concatenate([f.frame.samples for f in frames], axis=1)
