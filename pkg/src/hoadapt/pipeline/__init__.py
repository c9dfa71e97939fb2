"""Adaptive sender/receiver state machines and the session scheduler."""

from .controller import (
    AdaptationConfig,
    AdaptationController,
    AdaptationState,
    FadeWindow,
    adaptation_tick,
    is_starved,
    select_order,
    sender_apply_fade,
)
from .estimator import BandwidthEstimate, update_bandwidth
from .events import EVENT_KINDS, TRACE_FIELDS, TraceRow
from .jitter import JitterBuffer, Receiver, ReceivedFrame, receiver_reconstruct
from .session import (
    PacketLogEntry,
    Sender,
    SessionConfig,
    SessionResult,
    order_budget_violations,
    run_session,
    sender_tick,
)
