"""RTP-like packet format carrying PCM-quantized Ambisonics frames.

Layout (big-endian, 16-byte header, see docs/wire-format.md)::

    0  magic "HA"        2 bytes
    2  version           u8   (=1)
    3  flags             u8   bit0 fade_active, bit1 order_change, bits 2-7 zero
    4  sequence          u16  wrapping
    6  timestamp         u32  first sample index of the frame, mod 2**32
    10 order             u8   <= 15
    11 bit_depth         u8   16 | 24 | 32
    12 frame_length      u16  samples per channel
    14 fade_remaining    u16  samples until the running fade completes

followed by the channel-major PCM payload.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .ambi.frames import AmbisonicFrame
from .ambi.sh import channel_count

MAGIC = b"HA"
VERSION = 1
HEADER = struct.Struct(">2sBBHIBBHH")
HEADER_SIZE = HEADER.size
assert HEADER_SIZE == 16

FLAG_FADE_ACTIVE = 0x01
FLAG_ORDER_CHANGE = 0x02
RESERVED_FLAGS = 0xFC
BIT_DEPTHS = (16, 24, 32)
MAX_ORDER = 15
SEQ_MOD = 1 << 16


class MalformedPacket(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def _check_depth(bit_depth: int) -> None:
    if bit_depth not in BIT_DEPTHS:
        raise ValueError(f"unsupported bit depth {bit_depth}; use one of {BIT_DEPTHS}")


def payload_size(order: int, bit_depth: int, frame_length: int, bits: Callable[[int, int], int] | None = None) -> int:
    """Payload size in bits: each coefficient's bit depth times frame_length, summed over all (n, m).

    `bits`, if given, assigns a per-coefficient depth; v1 packets always use
    the uniform `bit_depth`.
    """
    if order < 0 or frame_length < 1:
        raise ValueError(f"bad order/frame length ({order}, {frame_length})")
    _check_depth(bit_depth)
    depth = bits or (lambda n, m: bit_depth)
    return sum(depth(n, m) * frame_length for n in range(order + 1) for m in range(-n, n + 1))


def seq_newer(a: int, b: int) -> bool:
    """Serial-number comparison: is `a` after `b` modulo 2**16."""
    return 0 < (a - b) % SEQ_MOD < SEQ_MOD // 2


def seq_delta(a: int, b: int) -> int:
    """Signed distance a - b in [-2**15, 2**15)."""
    d = (a - b) % SEQ_MOD
    return d - SEQ_MOD if d >= SEQ_MOD // 2 else d


@dataclass(frozen=True)
class PacketHeader:
    sequence: int
    timestamp: int
    order: int
    bit_depth: int
    frame_length: int
    fade_remaining: int = 0
    flags: int = 0
    version: int = VERSION

    def __post_init__(self):
        if not 0 <= self.sequence < SEQ_MOD:
            raise ValueError(f"sequence {self.sequence} out of u16 range")
        if not 0 <= self.timestamp < 1 << 32:
            raise ValueError(f"timestamp {self.timestamp} out of u32 range")
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"order {self.order} outside [0, {MAX_ORDER}]")
        _check_depth(self.bit_depth)
        if not 1 <= self.frame_length < 1 << 16:
            raise ValueError(f"frame length {self.frame_length} out of range")
        if not 0 <= self.fade_remaining < 1 << 16:
            raise ValueError(f"fade_remaining {self.fade_remaining} out of u16 range")
        if self.flags & RESERVED_FLAGS or not 0 <= self.flags < 256:
            raise ValueError(f"reserved flag bits set: {self.flags:#04x}")

    @property
    def fade_active(self) -> bool:
        return bool(self.flags & FLAG_FADE_ACTIVE)

    @property
    def order_change(self) -> bool:
        return bool(self.flags & FLAG_ORDER_CHANGE)

    @property
    def payload_bytes(self) -> int:
        return payload_size(self.order, self.bit_depth, self.frame_length) // 8

    def pack(self) -> bytes:
        return HEADER.pack(
            MAGIC,
            self.version,
            self.flags,
            self.sequence,
            self.timestamp,
            self.order,
            self.bit_depth,
            self.frame_length,
            self.fade_remaining,
        )


@dataclass(frozen=True)
class WirePacket:
    header: PacketHeader
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != self.header.payload_bytes:
            raise ValueError(f"payload is {len(self.payload)} bytes, header implies {self.header.payload_bytes}")

    def serialize(self) -> bytes:
        return self.header.pack() + self.payload

    def __len__(self) -> int:
        return HEADER_SIZE + len(self.payload)


# --- PCM ------------------------------------------------------------------------


def quantize(samples: np.ndarray, bit_depth: int, overflow: str = "clamp") -> tuple[np.ndarray, int]:
    """Signed PCM words (round half away from zero) and the number of clamped overloads."""
    _check_depth(bit_depth)
    x = np.asarray(samples, dtype=float)
    over = int(np.count_nonzero(np.abs(x) > 1.0))
    if over and overflow == "raise":
        raise OverflowError(f"{over} samples exceed full scale")
    if overflow not in ("clamp", "raise"):
        raise ValueError(f"unknown overflow policy {overflow!r}")
    scale = float(1 << (bit_depth - 1))
    words = np.sign(x) * np.floor(np.abs(x) * scale + 0.5)
    words = np.clip(words, -scale, scale - 1)
    return words.astype(np.int64), over


def pcm_to_float(words: np.ndarray, bit_depth: int) -> np.ndarray:
    return np.asarray(words, dtype=float) / float(1 << (bit_depth - 1))


def pack_words(words: np.ndarray, bit_depth: int) -> bytes:
    flat = np.ascontiguousarray(words, dtype=np.int64).ravel()
    if bit_depth == 16:
        return flat.astype(">i2").tobytes()
    if bit_depth == 32:
        return flat.astype(">i4").tobytes()
    raw = flat.astype(">i4").view(np.uint8).reshape(-1, 4)
    return raw[:, 1:].tobytes()


def unpack_words(payload: bytes, bit_depth: int, count: int) -> np.ndarray:
    if bit_depth == 16:
        return np.frombuffer(payload, dtype=">i2", count=count).astype(np.int64)
    if bit_depth == 32:
        return np.frombuffer(payload, dtype=">i4", count=count).astype(np.int64)
    b = np.frombuffer(payload, dtype=np.uint8, count=3 * count).reshape(-1, 3).astype(np.int64)
    v = (b[:, 0] << 16) | (b[:, 1] << 8) | b[:, 2]
    return np.where(v >= 1 << 23, v - (1 << 24), v)


# --- encapsulation ---------------------------------------------------------------


def encapsulate(
    frame: AmbisonicFrame,
    seq: int,
    fade_remaining: int = 0,
    flags: int = 0,
    bit_depth: int = 16,
    overflow: str = "clamp",
    counters: Counter | None = None,
) -> WirePacket:
    words, clamped = quantize(frame.samples, bit_depth, overflow)
    if counters is not None and clamped:
        counters["clamped_samples"] += clamped
    header = PacketHeader(
        sequence=seq % SEQ_MOD,
        timestamp=frame.start_index % (1 << 32),
        order=frame.order,
        bit_depth=bit_depth,
        frame_length=frame.frame_length,
        fade_remaining=fade_remaining,
        flags=flags,
    )
    return WirePacket(header, pack_words(words, bit_depth))


def parse_packet(data: bytes) -> WirePacket:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise MalformedPacket("truncated", f"{len(data)} bytes")
    magic, version, flags, seq, ts, order, depth, length, fade = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedPacket("bad_magic", repr(magic))
    if version != VERSION:
        raise MalformedPacket("bad_version", str(version))
    if flags & RESERVED_FLAGS:
        raise MalformedPacket("reserved_flags", f"{flags:#04x}")
    if order > MAX_ORDER:
        raise MalformedPacket("bad_order", str(order))
    if depth not in BIT_DEPTHS:
        raise MalformedPacket("bad_bit_depth", str(depth))
    if length == 0:
        raise MalformedPacket("bad_frame_length", "0")
    expected = payload_size(order, depth, length) // 8
    got = len(data) - HEADER_SIZE
    if got != expected:
        raise MalformedPacket("length_mismatch", f"payload {got} bytes, order {order} implies {expected}")
    header = PacketHeader(seq, ts, order, depth, length, fade, flags, version)
    return WirePacket(header, data[HEADER_SIZE:])


def dequantize(packet: WirePacket, sample_rate: int = 48000) -> AmbisonicFrame:
    h = packet.header
    c = channel_count(h.order)
    words = unpack_words(packet.payload, h.bit_depth, c * h.frame_length)
    samples = pcm_to_float(words, h.bit_depth).reshape(c, h.frame_length)
    return AmbisonicFrame(h.order, samples, sample_rate, h.timestamp)


def describe(packet: WirePacket) -> str:
    h = packet.header
    flags = ",".join(n for n, on in (("fade", h.fade_active), ("order_change", h.order_change)) if on) or "-"
    return (
        f"seq={h.sequence:5d} ts={h.timestamp:10d} order={h.order} ch={channel_count(h.order):2d} "
        f"bits={h.bit_depth} L={h.frame_length} fade_remaining={h.fade_remaining} flags={flags} "
        f"bytes={len(packet)}"
    )


# --- capture files ---------------------------------------------------------------

CAPTURE_MAGIC = b"HACP"
CAPTURE_HEADER = struct.Struct(">4sHH")
CAPTURE_RECORD = struct.Struct(">QI")


def write_capture(path, records: Iterable[tuple[int, bytes]]) -> None:
    """Store (time_ns, datagram) pairs in a minimal pcap-like container."""
    with open(path, "wb") as fh:
        fh.write(CAPTURE_HEADER.pack(CAPTURE_MAGIC, 1, 0))
        for t_ns, data in records:
            fh.write(CAPTURE_RECORD.pack(t_ns, len(data)))
            fh.write(data)


def read_capture(path) -> Iterator[tuple[int, bytes]]:
    with open(path, "rb") as fh:
        head = fh.read(CAPTURE_HEADER.size)
        if len(head) != CAPTURE_HEADER.size:
            raise ValueError(f"{path}: not a capture file")
        magic, version, _ = CAPTURE_HEADER.unpack(head)
        if magic != CAPTURE_MAGIC or version != 1:
            raise ValueError(f"{path}: not a capture file")
        while True:
            rec = fh.read(CAPTURE_RECORD.size)
            if not rec:
                return
            if len(rec) != CAPTURE_RECORD.size:
                raise ValueError(f"{path}: truncated record header")
            t_ns, n = CAPTURE_RECORD.unpack(rec)
            data = fh.read(n)
            if len(data) != n:
                raise ValueError(f"{path}: truncated record")
            yield t_ns, data
