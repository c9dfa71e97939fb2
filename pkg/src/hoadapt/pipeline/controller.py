"""Sender-side order adaptation.

The controller turns bandwidth estimates into an order decision. An
estimate below the threshold makes the largest order whose payload fits
the estimate's per-packet budget the supported order; at or above the
threshold the configured maximum is supported (still capped by the budget).
Down-switches act at once, either by truncation or by fading the doomed
channels out over ``fade_duration``. Up-switches need the supported order to
stay above the current one for ``hysteresis_hold`` and then climb one order
per hold period, without a fade-in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..ambi.frames import AmbisonicFrame, truncate_order
from ..ambi.sh import channel_count
from ..wire import FLAG_FADE_ACTIVE, FLAG_ORDER_CHANGE, MAX_ORDER, payload_size
from .estimator import BandwidthEstimate

log = logging.getLogger(__name__)

_EPS = 1e-9


def select_order(rate_bps: float, packet_interval: float, bit_depth: int, frame_length: int, max_order: int) -> int:
    """Highest order whose payload fits in rate_bps * packet_interval bits (0 if none does)."""
    if not rate_bps > 0:
        raise ValueError("rate_bps must be positive")
    budget = rate_bps * packet_interval
    best = 0
    for n in range(max_order + 1):
        if payload_size(n, bit_depth, frame_length) <= budget:
            best = n
    return best


def is_starved(rate_bps: float, packet_interval: float, bit_depth: int, frame_length: int) -> bool:
    return payload_size(0, bit_depth, frame_length) > rate_bps * packet_interval


class FadeWindow:
    """Raised-cosine fade-out: 1 at offset 0, 0 from `duration` samples on."""

    def __init__(self, duration: int):
        if duration < 1:
            raise ValueError("fade duration must be at least one sample")
        self.duration = duration

    def __call__(self, offset) -> np.ndarray:
        t = np.asarray(offset, dtype=float)
        w = 0.5 * (1.0 + np.cos(np.pi * np.clip(t, 0.0, self.duration) / self.duration))
        return np.where(t >= self.duration, 0.0, w)


@dataclass
class AdaptationConfig:
    max_order: int = 3
    threshold_bps: float = 2e6
    window: float = 0.1
    hysteresis_hold: float = 2.0
    fade_duration: float = 0.0
    bit_depth: int = 16
    frame_length: int = 128
    sample_rate: int = 48000
    enabled: bool = True

    def __post_init__(self):
        if not 0 <= self.max_order <= MAX_ORDER:
            raise ValueError(f"max_order must lie in [0, {MAX_ORDER}]")
        if self.threshold_bps <= 0 or self.window <= 0 or self.hysteresis_hold < 0:
            raise ValueError("threshold, window must be positive and hold non-negative")
        if self.fade_duration < 0:
            raise ValueError("fade_duration must be >= 0")
        if self.fade_samples > 0xFFFF:
            raise ValueError("fade_duration too long for the 16-bit fade_remaining header field")

    @property
    def packet_interval(self) -> float:
        return self.frame_length / self.sample_rate

    @property
    def fade_samples(self) -> int:
        return int(round(self.fade_duration * self.sample_rate))


@dataclass
class Outgoing:
    frame: AmbisonicFrame
    flags: int
    fade_remaining: int
    events: list[str] = field(default_factory=list)


@dataclass
class AdaptationState:
    current_order: int
    pending_order: int
    fade_active: bool = False
    fade_elapsed: int = 0
    latest_estimate: float | None = None
    supported_order: int | None = None
    up_since: float | None = None
    last_step: float = -math.inf
    starved: bool = False
    last_sent_order: int | None = None


class AdaptationController:
    def __init__(self, config: AdaptationConfig, initial_order: int | None = None):
        self.config = config
        start = config.max_order if initial_order is None else initial_order
        self.state = AdaptationState(current_order=start, pending_order=start)
        self._fade = FadeWindow(config.fade_samples) if config.fade_samples else None
        self._seen = 0
        self.starvation_events = 0

    # --- decisions ------------------------------------------------------------------

    def _supported(self, estimate_bps: float) -> int:
        cfg = self.config
        if estimate_bps <= 0:
            return 0
        # the budget caps up-steps as well, so recovery never overshoots the estimate
        return select_order(estimate_bps, cfg.packet_interval, cfg.bit_depth, cfg.frame_length, cfg.max_order)

    def on_estimate(self, estimate_bps: float, window_start: float, now: float) -> list[str]:
        """React to a completed measurement window. Returns event names."""
        cfg, st = self.config, self.state
        st.latest_estimate = estimate_bps
        if not cfg.enabled:
            return []
        events = []
        support = self._supported(estimate_bps)
        st.supported_order = support
        starved = estimate_bps < cfg.threshold_bps and is_starved(estimate_bps, cfg.packet_interval, cfg.bit_depth, cfg.frame_length)
        if starved and not st.starved:
            self.starvation_events += 1
            log.info("bandwidth %.0f bps below the order-0 packet rate; holding order 0", estimate_bps)
        st.starved = starved
        if support > st.current_order:
            if st.up_since is None:
                st.up_since = window_start
        else:
            st.up_since = None
        if st.fade_active:
            return events
        if estimate_bps < cfg.threshold_bps and support < st.current_order:
            if self._fade is None:
                st.current_order = st.pending_order = support
            else:
                st.pending_order = support
                st.fade_active = True
                st.fade_elapsed = 0
                events.append("fade_started")
        return events

    def tick(self, now: float) -> list[str]:
        """Time-driven part of the policy: hysteresis up-steps."""
        cfg, st = self.config, self.state
        if not cfg.enabled or st.fade_active or st.up_since is None:
            return []
        if st.supported_order is None or st.supported_order <= st.current_order:
            return []
        ref = max(st.up_since, st.last_step)
        if now - ref >= cfg.hysteresis_hold - _EPS:
            st.current_order += 1
            st.pending_order = st.current_order
            st.last_step = now
            if st.current_order >= st.supported_order:
                st.up_since = None
        return []

    @property
    def settled(self) -> bool:
        """Current order equals what the latest estimate supports (no fade, no pending step)."""
        st = self.state
        return not st.fade_active and st.supported_order == st.current_order

    # --- per-packet shaping -----------------------------------------------------------

    def prepare(self, frame: AmbisonicFrame) -> Outgoing:
        """Shape one full-order frame for transmission under the current decision."""
        st = self.state
        out = truncate_order(frame, min(st.current_order, frame.order))
        events = []
        flags = 0
        fade_remaining = 0
        if st.fade_active:
            fade_remaining = self._fade.duration - st.fade_elapsed
            out = sender_apply_fade(out, st.pending_order, self._fade, st.fade_elapsed)
            flags |= FLAG_FADE_ACTIVE
            st.fade_elapsed += out.frame_length
            if st.fade_elapsed >= self._fade.duration:
                st.fade_active = False
                st.current_order = st.pending_order
                events.append("fade_completed")
        if st.last_sent_order is not None and out.order != st.last_sent_order:
            flags |= FLAG_ORDER_CHANGE
            events.insert(0, "order_changed")
        st.last_sent_order = out.order
        return Outgoing(out, flags, fade_remaining, events)


def sender_apply_fade(frame: AmbisonicFrame, pending_order: int, window: FadeWindow, elapsed: int) -> AmbisonicFrame:
    """Scale channels above `pending_order` by the fade gain at each sample's offset."""
    keep = channel_count(pending_order)
    if keep >= frame.channel_count:
        return frame
    w = window(elapsed + np.arange(frame.frame_length))
    samples = frame.samples.copy()
    samples[keep:] *= w[None, :]
    return frame.with_samples(samples)


def adaptation_tick(controller: AdaptationController, est: BandwidthEstimate, now: float) -> list[str]:
    """Feed any estimates published since the last call, then run the timers."""
    events = []
    fresh = est.published - controller._seen
    if fresh > 0:
        window = est.window
        for end, value in list(est.history)[-fresh:]:
            events += controller.on_estimate(value, end - window, now)
        controller._seen = est.published
    events += controller.tick(now)
    return events
