import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoadapt.ambi import AmbisonicFrame, Direction, SourceSignal, encode_plane_wave, zero_pad
from hoadapt.netsim import ClockRegression, Link, LinkConfig
from hoadapt.pipeline import (
    AdaptationConfig,
    AdaptationController,
    BandwidthEstimate,
    FadeWindow,
    JitterBuffer,
    Receiver,
    SessionConfig,
    order_budget_violations,
    receiver_reconstruct,
    run_session,
    select_order,
    sender_apply_fade,
    update_bandwidth,
)
from hoadapt.pipeline.jitter import Popped
from hoadapt.wire import FLAG_FADE_ACTIVE, FLAG_ORDER_CHANGE, dequantize, encapsulate, parse_packet, payload_size

FS = 48000
L = 128
PACKET_INTERVAL = L / FS


def tone(seconds, order=3, az=40.0, el=10.0, freq=440.0, amp=0.5):
    t = np.arange(int(seconds * FS)) / FS
    src = SourceSignal(amp * np.sin(2 * np.pi * freq * t), FS, Direction.from_degrees(az, el))
    return src, encode_plane_wave(src, order).samples


def scripted(steps, nominal=13e6):
    """Probe reporting a piecewise-constant available rate, independent of traffic."""

    def rate(t):
        r = nominal
        for t0, c in steps:
            if t >= t0:
                r = c
        return r

    def probe(t0, t1):
        return rate(t0) * (t1 - t0)

    return probe


def ideal_link(**kw):
    kw.setdefault("capacity_bps", 1e9)
    kw.setdefault("queue_limit", 10**9)
    kw.setdefault("propagation_delay", 0.0)
    return LinkConfig(**kw)


# --- estimator --------------------------------------------------------------------------


def test_estimate_two_mbps_over_one_second():
    est = BandwidthEstimate(window=1.0)
    update_bandwidth(est, 2_000_000, 0.5)
    update_bandwidth(est, 0, 1.0)
    assert est.estimate == 2e6


def test_empty_window_is_zero():
    est = BandwidthEstimate(window=0.1)
    est.update(0, 0.1)
    assert est.estimate == 0.0


def test_250_packets_in_100ms():
    est = BandwidthEstimate(window=0.1)
    for i in range(250):
        est.update(8192, i * 0.0004)
    est.update(0, 0.1)
    # hand sum: 250 * 8192 = 2_048_000 bits in 0.1 s
    assert est.estimate == pytest.approx(20.48e6)


def test_estimator_clock_regression():
    est = BandwidthEstimate()
    est.update(1, 0.05)
    with pytest.raises(ClockRegression):
        est.update(1, 0.01)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.05), st.integers(0, 40000)), min_size=1, max_size=60))
def test_estimate_is_window_sum(arrivals):
    est = BandwidthEstimate(window=0.1)
    t, log = 0.0, []
    for gap, bits in arrivals:
        t += gap
        est.update(bits, t)
        log.append((t, bits))
    est.update(0, math.floor(t / 0.1 + 1) * 0.1 + 1e-12)
    for end, value in est.history:
        start = end - 0.1
        expect = sum(b for tt, b in log if start - 1e-9 <= tt < end - 1e-9)
        assert value == pytest.approx(expect / 0.1)
        assert value >= 0


# --- order selection --------------------------------------------------------------------


def test_select_order_examples():
    assert select_order(2e6, PACKET_INTERVAL, 16, L, 3) == 0
    assert select_order(13e6, PACKET_INTERVAL, 16, L, 3) == 3
    assert select_order(1e12, PACKET_INTERVAL, 16, L, 3) == 3
    # budgets behind the first two examples
    assert 2e6 * PACKET_INTERVAL == pytest.approx(5333.33, abs=0.01)
    assert 13e6 * PACKET_INTERVAL == pytest.approx(34666.67, abs=0.01)
    assert [payload_size(n, 16, L) for n in range(4)] == [2048, 8192, 18432, 32768]


@settings(max_examples=300, deadline=None)
@given(st.floats(1e3, 1e9), st.sampled_from([16, 24, 32]), st.sampled_from([64, 128, 256]), st.integers(0, 15))
def test_select_order_matches_closed_form(rate_bps, depth, length, max_order):
    packet_interval = length / FS
    # (n+1)^2 * B * L <= budget  <=>  n + 1 <= isqrt(floor(budget / (B * L)))
    slots = math.floor(rate_bps * packet_interval / (depth * length))
    expect = min(max_order, max(0, math.isqrt(slots) - 1))
    assert select_order(rate_bps, packet_interval, depth, length, max_order) == expect


def test_select_order_rejects_nonpositive():
    with pytest.raises(ValueError):
        select_order(0.0, PACKET_INTERVAL, 16, L, 3)


# --- fade -----------------------------------------------------------------------------


def test_fade_window_boundaries():
    w = FadeWindow(48000)
    assert w(0) == 1.0
    assert w(48000) == 0.0
    assert w(24000) == pytest.approx(0.5, abs=1e-15)
    assert w(10**6) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 70000))
def test_fade_window_monotone_and_continuous(duration):
    w = FadeWindow(duration)(np.arange(duration + 2))
    assert np.all(np.diff(w) <= 0)
    # largest step of a raised cosine sampled at unit spacing
    assert np.max(np.abs(np.diff(w))) <= math.pi / (2 * duration) + 1e-12


def test_sender_apply_fade_examples():
    rng = np.random.default_rng(1)
    f = AmbisonicFrame(3, rng.uniform(-0.5, 0.5, (16, 1)))
    w = FadeWindow(1000)
    assert np.array_equal(sender_apply_fade(f, 1, w, 0).samples, f.samples)
    end = sender_apply_fade(f, 1, w, 1000).samples
    assert np.array_equal(end[:4], f.samples[:4]) and not end[4:].any()
    mid = sender_apply_fade(f, 1, w, 500).samples
    assert np.allclose(mid[4:], 0.5 * f.samples[4:], atol=1e-15)
    assert np.array_equal(mid[:4], f.samples[:4])


def fade_session(fade=1.0, seconds=4.0, drop=1.0):
    _, sig = tone(seconds)
    adapt = AdaptationConfig(threshold_bps=5e6, fade_duration=fade)
    cfg = SessionConfig(adaptation=adapt, link=ideal_link())
    return run_session(sig, cfg, probe=scripted([(drop, 4e6)])), sig


def test_fade_spans_375_full_order_packets():
    res, _ = fade_session()
    fading = [p for p in res.packets if p.fading]
    assert len(fading) == math.ceil(48000 / 128) == 375
    assert all(p.order == 3 for p in fading)
    first = res.packets.index(fading[0])
    assert [p.fading for p in res.packets[first:first + 375]] == [True] * 375
    after = res.packets[first + 375]
    assert after.order == 1 and not after.fading
    assert all(p.order == 1 for p in res.packets[first + 375:])


def test_fade_headers():
    res, _ = fade_session()
    heads = [parse_packet(d).header for _, d in res.capture]
    faded = [h for h in heads if h.flags & FLAG_FADE_ACTIVE]
    assert faded[0].fade_remaining == 48000 and faded[-1].fade_remaining == 128
    changes = [i for i, h in enumerate(heads) if h.flags & FLAG_ORDER_CHANGE]
    assert len(changes) == 1 and heads[changes[0]].order == 1 and heads[changes[0] - 1].order == 3
    events = [r.event for r in res.trace if r.event in ("fade_started", "fade_completed", "order_changed")]
    assert events == ["fade_started", "fade_completed", "order_changed"]


# --- adaptation -----------------------------------------------------------------------


def test_steady_bandwidth_keeps_full_order():
    _, sig = tone(100 * PACKET_INTERVAL)
    res = run_session(sig, SessionConfig(link=ideal_link()), probe=scripted([]))
    assert len(res.packets) == 100
    assert set(res.sent_orders) == {3}


def test_instantaneous_drop_next_packet_lower():
    _, sig = tone(2.0)
    cfg = SessionConfig(adaptation=AdaptationConfig(threshold_bps=5e6), link=ideal_link())
    res = run_session(sig, cfg, probe=scripted([(1.0, 4e6)]))
    orders = res.sent_orders
    k = int(np.argmax(orders < 3))
    assert orders[k] == 1 and orders[k - 1] == 3
    # the estimate for [1.0, 1.1) is acted on at the first tick after 1.1 s
    assert res.packets[k].time == pytest.approx(math.ceil(1.1 / PACKET_INTERVAL) * PACKET_INTERVAL)
    assert set(orders[k:]) == {1}


def test_drop_and_recovery_returns_to_max():
    _, sig = tone(12.0)
    cfg = SessionConfig(link=ideal_link())
    res = run_session(sig, cfg, probe=scripted([(1.0, 1e6), (3.0, 13e6)]))
    orders = res.sent_orders
    times = np.array([p.time for p in res.packets])
    assert orders[times > 1.1 + PACKET_INTERVAL].min() == 0
    # one step per 2 s hold, starting from the first window above threshold
    for t_step, order in ((5.0, 1), (7.0, 2), (9.0, 3)):
        k = int(np.argmax(times >= t_step - 1e-9))
        assert orders[k - 1] == order - 1 and orders[k] == order
    assert set(orders[times >= 9.0]) == {3}


def test_partial_recovery_caps_at_budget():
    _, sig = tone(8.0)
    cfg = SessionConfig(link=ideal_link())
    res = run_session(sig, cfg, probe=scripted([(1.0, 1e6), (2.0, 4e6)]))
    # 4 Mbps is above the 2 Mbps threshold but only affords order 1
    assert res.sent_orders[-1] == 1
    assert res.sent_orders.max(initial=0) == 3  # before the drop


def test_noisy_estimate_does_not_step_up_early():
    ctl = AdaptationController(AdaptationConfig(hysteresis_hold=1.0), initial_order=0)
    ctl.on_estimate(13e6, 0.0, 0.1)
    ctl.tick(0.5)
    ctl.on_estimate(1e6, 0.5, 0.6)  # dip resets the hold
    ctl.on_estimate(13e6, 0.6, 0.7)
    ctl.tick(1.2)
    assert ctl.state.current_order == 0
    ctl.tick(1.6)
    assert ctl.state.current_order == 1


def test_starvation_holds_order_zero():
    ctl = AdaptationController(AdaptationConfig())
    ctl.on_estimate(1e5, 0.0, 0.1)  # below the 768 kbps order-0 payload rate
    assert ctl.state.current_order == 0
    assert ctl.state.starved and ctl.starvation_events == 1


def test_adaptation_config_rejects_long_fade():
    with pytest.raises(ValueError):
        AdaptationConfig(fade_duration=2.0)


def test_order_budget_invariant_over_reaction_run():
    _, sig = tone(12.0)
    cfg = SessionConfig()
    res = run_session(sig, cfg, probe=None)
    assert order_budget_violations(res.packets, cfg.adaptation) == []
    link = LinkConfig(schedule=[(1.0, 1e6), (5.0, 13e6)])
    res = run_session(sig, SessionConfig(link=link))
    checked = [p for p in res.packets if p.estimate is not None and p.estimate < 2e6]
    assert len(checked) > 100
    assert order_budget_violations(res.packets, cfg.adaptation) == []


def test_order_budget_invariant_flags_violations():
    from hoadapt.pipeline import PacketLogEntry

    bad = PacketLogEntry(0, 0.0, 3, 4112, 1e6, False, False, False)
    assert order_budget_violations([bad], AdaptationConfig()) == [bad]


# --- jitter buffer and receiver ---------------------------------------------------------


def packet(seq, order=0, value=0.0):
    return encapsulate(AmbisonicFrame(order, np.full(((order + 1) ** 2, L), value), start_index=seq * L), seq)


def test_single_loss_conceals_one_frame():
    jb = JitterBuffer(PACKET_INTERVAL, depth=2)
    for s in range(10):
        if s != 4:
            jb.push(packet(s), 0.01 + s * PACKET_INTERVAL)
    out = [jb.pop() for _ in range(10)]
    assert [p.seq for p in out] == list(range(10))
    assert [p.concealed for p in out] == [s == 4 for s in range(10)]
    assert jb.stats["concealed"] == 1


def test_duplicate_and_late_packets():
    jb = JitterBuffer(PACKET_INTERVAL, depth=1)
    assert jb.push(packet(0), 0.0) == "accepted"
    assert jb.push(packet(0), 0.0) == "duplicate"
    jb.pop()
    jb.pop()  # slot 1 concealed
    assert jb.push(packet(1), 0.1) == "late"
    assert jb.stats["duplicate"] == 1 and jb.stats["late"] == 1


def test_reorder_within_depth_is_absorbed():
    jb = JitterBuffer(PACKET_INTERVAL, depth=3)
    jb.push(packet(0), 0.0)
    jb.push(packet(2), PACKET_INTERVAL)
    jb.push(packet(1), 2 * PACKET_INTERVAL)
    assert [jb.pop().concealed for _ in range(3)] == [False, False, False]


def test_playout_clock():
    jb = JitterBuffer(PACKET_INTERVAL, depth=4)
    jb.push(packet(2), 1.0)  # first two lost
    assert jb.origin == pytest.approx(1.0 - 2 * PACKET_INTERVAL + 4 * PACKET_INTERVAL)
    assert jb.playout_time(2) == pytest.approx(1.0 + 4 * PACKET_INTERVAL)


def test_sequence_wrap():
    jb = JitterBuffer(PACKET_INTERVAL, depth=2, first_seq=65530)
    seqs = [65530 + i for i in range(12)]
    for i, s in enumerate(seqs):
        jb.push(packet(s % 65536), i * PACKET_INTERVAL)
    out = [jb.pop() for _ in range(12)]
    assert [p.seq for p in out] == seqs
    assert not any(p.concealed for p in out)
    assert [p.packet.header.sequence for p in out][5:8] == [65535, 0, 1]


def test_receiver_counts_malformed():
    rx = Receiver(1, L)
    assert rx.receive(b"junk", 0.0) == "malformed"
    assert rx.stats["malformed"] == 1 and rx.stats["malformed_truncated"] == 1


def test_reconstruct_no_fade_equals_dequantized_frame():
    rng = np.random.default_rng(3)
    f = AmbisonicFrame(1, rng.uniform(-1, 1, (4, L)))
    p = encapsulate(f, 7)
    got = receiver_reconstruct(Popped(7, 0.0, p), 3, L)
    assert np.array_equal(got.frame.samples, zero_pad(dequantize(p), 3).samples)
    full = encapsulate(AmbisonicFrame(3, rng.uniform(-1, 1, (16, L))), 8)
    assert np.array_equal(receiver_reconstruct(Popped(8, 0.0, full), 3, L).frame.samples, dequantize(full).samples)
    lost = receiver_reconstruct(Popped(9, 0.0, None), 3, L)
    assert lost.concealed and not lost.frame.samples.any() and lost.frame.channel_count == 16


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.3), st.sampled_from([0.0, 0.001, 0.004]), st.integers(0, 2**32), st.integers(0, 6))
def test_jitter_buffer_totality(loss, jitter, seed, depth):
    _, sig = tone(200 * PACKET_INTERVAL, order=1)
    link = LinkConfig(capacity_bps=1e8, loss_probability=loss, jitter_stddev=jitter, rng_seed=seed)
    res = run_session(sig, SessionConfig(adaptation=AdaptationConfig(max_order=1), link=link, jitter_depth=depth),
                      probe=scripted([]))
    assert len(res.frames) == 200
    assert [f.seq for f in res.frames] == list(range(200))
    lost = sum(p.dropped is not None for p in res.packets)
    assert res.concealed == lost + res.counters["late"]
    assert sum(r.event == "conceal" for r in res.trace) == res.concealed


def test_lossless_session_reproduces_quantized_input():
    _, sig = tone(0.5)
    res = run_session(sig, SessionConfig(link=ideal_link()), probe=scripted([]))
    assert res.concealed == 0
    assert np.max(np.abs(res.received[:, : sig.shape[1]] - sig)) <= 2.0 ** -15


def test_instantaneous_switch_equals_low_order_encoding():
    src, sig = tone(2.0)
    cfg = SessionConfig(adaptation=AdaptationConfig(threshold_bps=5e6), link=ideal_link())
    res = run_session(sig, cfg, probe=scripted([(1.0, 4e6)]))
    k = int(np.argmax(res.sent_orders < 3))
    start = k * L
    low = encode_plane_wave(src, 1).samples[:, start:]
    got = res.received[:, start: sig.shape[1]]
    assert np.max(np.abs(got[:4] - low)) <= 2.0 ** -15
    assert not got[4:].any()


def test_session_determinism():
    _, sig = tone(1.0)
    link = LinkConfig(loss_probability=0.1, jitter_stddev=0.002, rng_seed=99)
    a = run_session(sig, SessionConfig(link=link))
    b = run_session(sig, SessionConfig(link=link))
    assert a.trace == b.trace
    assert a.capture == b.capture
    assert np.array_equal(a.received, b.received)


def test_session_rejects_wrong_channel_count():
    with pytest.raises(ValueError):
        run_session(np.zeros((4, 256)), SessionConfig())
