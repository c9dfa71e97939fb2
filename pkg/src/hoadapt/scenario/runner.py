"""Run one scene under each stimulus condition and write audio and traces."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ambi.grids import BUILTIN_GRIDS, LoudspeakerLayout, builtin_layout, load_layout
from ..netsim import LinkConfig
from ..pipeline.controller import AdaptationConfig
from ..pipeline.session import Probe, SessionConfig, SessionResult, run_session
from ..wire import write_capture
from .audio import write_audio
from .config import STIMULUS_KINDS, STIMULUS_SUFFIX, ScenarioConfig
from .scene import build_scene, scene_coefficients
from .trace import write_trace

log = logging.getLogger(__name__)

SCRIPTED_THRESHOLD_BPS = 5e6


def scripted_drop_time(config: ScenarioConfig) -> float:
    """Default drop instant: one third of the scene, rounded down to a window boundary."""
    if config.stimulus.drop_time is not None:
        return config.stimulus.drop_time
    w = config.adaptation.window
    return math.floor(config.duration / 3.0 / w + 1e-9) * w


def stimulus_session(config: ScenarioConfig, kind: str | None = None) -> SessionConfig:
    kind = kind or config.stimulus.kind
    if kind not in STIMULUS_KINDS:
        raise ValueError(f"unknown stimulus {kind!r}")
    link, adapt, stim = config.link, config.adaptation, config.stimulus
    schedule: list = []
    loss = 0.0
    threshold = adapt.threshold_bps
    fade = 0.0
    forced = None
    if kind == "reference":
        forced = config.max_order
    elif kind == "omni":
        forced = 0
    elif kind == "first_order":
        forced = min(1, config.max_order)
    elif kind == "corrupted":
        forced = config.max_order
        loss = stim.loss_probability
    else:
        if link.schedule:
            schedule = list(link.schedule)
        else:
            schedule = [(scripted_drop_time(config), stim.drop_to_bps)]
            threshold = SCRIPTED_THRESHOLD_BPS
        if stim.threshold_bps is not None:
            threshold = stim.threshold_bps
        fade = stim.fade_duration if kind == "crossfade" else 0.0
    return SessionConfig(
        adaptation=AdaptationConfig(
            max_order=config.max_order,
            threshold_bps=threshold,
            window=adapt.window,
            hysteresis_hold=adapt.hysteresis_hold,
            fade_duration=fade,
            bit_depth=config.bit_depth,
            frame_length=config.frame_length,
            sample_rate=config.sample_rate,
        ),
        link=LinkConfig(
            capacity_bps=link.capacity_bps,
            queue_limit=link.queue_limit,
            propagation_delay=link.propagation_delay,
            jitter_stddev=link.jitter_stddev,
            loss_probability=loss,
            rng_seed=config.seed,
            schedule=schedule,
        ),
        jitter_depth=config.receiver.jitter_depth,
        forced_order=forced,
    )


def scene_layout(config: ScenarioConfig) -> LoudspeakerLayout:
    name = config.receiver.layout
    if name in BUILTIN_GRIDS:
        return builtin_layout(name, config.max_order)
    return load_layout(config.base_dir / name, config.max_order)


def _suffixed(name: str, suffix: str | None) -> str:
    if not suffix:
        return name
    p = Path(name)
    return str(p.with_name(f"{p.stem}_{suffix}{p.suffix}"))


def output_paths(config: ScenarioConfig, out_dir, suffix: str | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {}
    for key in ("audio", "trace", "loudspeakers", "capture"):
        name = getattr(config.outputs, key)
        if name is not None:
            paths[key] = out_dir / _suffixed(name, suffix)
    return paths


@dataclass
class StimulusResult:
    kind: str
    session: SessionResult
    paths: dict[str, Path] = field(default_factory=dict)
    clamped: int = 0


def run_stimulus(config: ScenarioConfig, out_dir=None, kind: str | None = None, suffix: str | None = None,
                 coefficients: np.ndarray | None = None, probe: Probe | None = None) -> StimulusResult:
    """Simulate one stimulus and write its outputs.

    Anything this call wrote is removed again if a later step fails.
    """
    kind = kind or config.stimulus.kind
    if coefficients is None:
        coefficients = scene_coefficients(build_scene(config), config.max_order)
    session_cfg = stimulus_session(config, kind)
    result = run_session(coefficients, session_cfg, probe=probe, sample_rate=config.sample_rate)
    received = result.received[:, : config.total_samples]
    out = StimulusResult(kind, result)
    if out_dir is None:
        return out

    paths = output_paths(config, out_dir, suffix)
    written: list[Path] = []
    try:
        for p in paths.values():
            p.parent.mkdir(parents=True, exist_ok=True)
        written.append(paths["audio"])
        out.clamped += write_audio(received, paths["audio"], config.sample_rate, config.bit_depth)
        written.append(paths["trace"])
        write_trace(result.trace, paths["trace"])
        if "loudspeakers" in paths:
            layout = scene_layout(config)
            feeds = layout.decode_matrix[:, : received.shape[0]] @ received
            written.append(paths["loudspeakers"])
            out.clamped += write_audio(feeds, paths["loudspeakers"], config.sample_rate, config.bit_depth)
        if "capture" in paths:
            written.append(paths["capture"])
            write_capture(paths["capture"], result.capture)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    if out.clamped:
        log.warning("%s: %d output samples clamped at full scale", kind, out.clamped)
    out.paths = paths
    return out


def run_all_stimuli(config: ScenarioConfig, out_dir) -> dict[str, StimulusResult]:
    """All six conditions of one scene, outputs named by stimulus suffix."""
    coefficients = scene_coefficients(build_scene(config), config.max_order)
    results: dict[str, StimulusResult] = {}
    try:
        for kind in STIMULUS_KINDS:
            results[kind] = run_stimulus(config, out_dir, kind, STIMULUS_SUFFIX[kind], coefficients)
    except BaseException:
        for r in results.values():
            for p in r.paths.values():
                p.unlink(missing_ok=True)
        raise
    return results
