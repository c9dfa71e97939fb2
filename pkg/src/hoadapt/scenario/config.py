"""Scenario configuration: YAML schema, defaults and validation.

Every validation failure raises ConfigError whose message starts with the
dotted path of the offending field, e.g. ``link.loss_probability: ...``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..ambi.grids import BUILTIN_GRIDS
from ..wire import BIT_DEPTHS, MAX_ORDER

CONFIG_VERSION = 1

STIMULUS_KINDS = ("reference", "omni", "first_order", "instantaneous", "crossfade", "corrupted")
STIMULUS_SUFFIX = {
    "reference": "ref",
    "omni": "omni",
    "first_order": "o1",
    "instantaneous": "inst",
    "crossfade": "fade",
    "corrupted": "corr",
}
BUILTIN_SIGNALS = ("sine", "noise_burst", "exp_sweep")
TRAJECTORY_KINDS = ("static", "azimuth_sweep", "elevation_sweep")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class SignalSpec:
    builtin: str | None = None
    file: Path | None = None
    amplitude: float = 0.5
    frequency: float = 440.0
    start_frequency: float = 50.0
    stop_frequency: float = 10000.0
    burst_length: float = 0.25
    burst_period: float = 0.5
    band: tuple[float, float] = (200.0, 4000.0)


@dataclass
class TrajectorySpec:
    kind: str = "static"
    azimuth: float = 0.0
    elevation: float = 0.0
    start: float = 0.0
    stop: float = 0.0
    duration: float = 0.0


@dataclass
class SourceSpec:
    signal: SignalSpec
    trajectory: TrajectorySpec
    name: str = "source"


@dataclass
class LinkSpec:
    capacity_bps: float = 13e6
    queue_limit: int = 64 * 1024
    propagation_delay: float = 0.020
    jitter_stddev: float = 0.0
    loss_probability: float = 0.0
    schedule: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class AdaptationSpec:
    threshold_bps: float = 2e6
    window: float = 0.1
    hysteresis_hold: float = 2.0


@dataclass
class ReceiverSpec:
    jitter_depth: int = 4
    layout: str = "tdesign-6-36"


@dataclass
class StimulusSpec:
    kind: str = "reference"
    # scripted drop for the instantaneous and crossfade conditions; None = derived default
    drop_time: float | None = None
    drop_to_bps: float = 4e6
    # None: 5 Mbps with the scripted drop, adaptation.threshold_bps with a link schedule
    threshold_bps: float | None = None
    fade_duration: float = 1.0
    loss_probability: float = 0.05


@dataclass
class OutputSpec:
    audio: str = "ambisonics.wav"
    trace: str = "trace.csv"
    loudspeakers: str | None = None
    capture: str | None = None


@dataclass
class ScenarioConfig:
    sources: list[SourceSpec]
    sample_rate: int = 48000
    frame_length: int = 128
    bit_depth: int = 16
    max_order: int = 3
    duration: float = 10.0
    seed: int = 0
    name: str = "scene"
    link: LinkSpec = field(default_factory=LinkSpec)
    adaptation: AdaptationSpec = field(default_factory=AdaptationSpec)
    receiver: ReceiverSpec = field(default_factory=ReceiverSpec)
    stimulus: StimulusSpec = field(default_factory=StimulusSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def total_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


# --- field readers --------------------------------------------------------------------


def _section(doc: dict, key: str, path: str) -> dict:
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a mapping")
    return value


def _check_keys(doc: dict, allowed, path: str) -> None:
    for key in doc:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown field")


def _number(doc: dict, key: str, path: str, default, *, lo=None, hi=None, lo_open=False, integer=False):
    where = f"{path}.{key}" if path else key
    value = doc.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if integer and (not isinstance(value, int) and not float(value).is_integer()):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(where, f"{value!r} must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and value > hi:
        raise ConfigError(where, f"{value!r} must be <= {hi}")
    return int(value) if integer else float(value)


def _choice(doc: dict, key: str, path: str, default, choices):
    where = f"{path}.{key}" if path else key
    value = doc.get(key, default)
    if value not in choices:
        raise ConfigError(where, f"{value!r} is not one of {', '.join(map(str, choices))}")
    return value


def _signal(doc: Any, path: str) -> SignalSpec:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    _check_keys(doc, {"builtin", "file", "amplitude", "frequency", "start_frequency", "stop_frequency",
                      "burst_length", "burst_period", "band"}, path)
    if ("builtin" in doc) == ("file" in doc):
        raise ConfigError(path, "give exactly one of 'builtin' or 'file'")
    spec = SignalSpec()
    if "builtin" in doc:
        spec.builtin = _choice(doc, "builtin", path, None, BUILTIN_SIGNALS)
    else:
        if not isinstance(doc["file"], str):
            raise ConfigError(f"{path}.file", "expected a path string")
        spec.file = Path(doc["file"])
    spec.amplitude = _number(doc, "amplitude", path, 0.5, lo=0.0, hi=1.0, lo_open=True)
    spec.frequency = _number(doc, "frequency", path, 440.0, lo=0.0, lo_open=True)
    spec.start_frequency = _number(doc, "start_frequency", path, 50.0, lo=0.0, lo_open=True)
    spec.stop_frequency = _number(doc, "stop_frequency", path, 10000.0, lo=0.0, lo_open=True)
    spec.burst_length = _number(doc, "burst_length", path, 0.25, lo=0.0, lo_open=True)
    spec.burst_period = _number(doc, "burst_period", path, 0.5, lo=0.0, lo_open=True)
    if spec.burst_length > spec.burst_period:
        raise ConfigError(f"{path}.burst_length", "must not exceed burst_period")
    band = doc.get("band", [200.0, 4000.0])
    if not (isinstance(band, (list, tuple)) and len(band) == 2
            and all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in band)
            and 0 < band[0] < band[1]):
        raise ConfigError(f"{path}.band", "expected [low_hz, high_hz] with 0 < low < high")
    spec.band = (float(band[0]), float(band[1]))
    return spec


def _trajectory(doc: Any, path: str) -> TrajectorySpec:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    kind = _choice(doc, "kind", path, "static", TRAJECTORY_KINDS)
    spec = TrajectorySpec(kind=kind)
    if kind == "static":
        _check_keys(doc, {"kind", "azimuth", "elevation"}, path)
        spec.azimuth = _number(doc, "azimuth", path, 0.0, lo=-180.0, hi=180.0)
        spec.elevation = _number(doc, "elevation", path, 0.0, lo=-90.0, hi=90.0)
        return spec
    _check_keys(doc, {"kind", "from", "to", "duration", "azimuth", "elevation"}, path)
    spec.duration = _number(doc, "duration", path, None, lo=0.0, lo_open=True)
    if spec.duration is None:
        raise ConfigError(f"{path}.duration", "required for sweeps")
    if kind == "azimuth_sweep":
        spec.start = _number(doc, "from", path, -90.0, lo=-180.0, hi=180.0)
        spec.stop = _number(doc, "to", path, 90.0, lo=-180.0, hi=180.0)
        spec.elevation = _number(doc, "elevation", path, 0.0, lo=-90.0, hi=90.0)
    else:
        spec.start = _number(doc, "from", path, 0.0, lo=-180.0, hi=180.0)
        spec.stop = _number(doc, "to", path, 180.0, lo=-180.0, hi=180.0)
        spec.azimuth = _number(doc, "azimuth", path, 0.0, lo=-180.0, hi=180.0)
    return spec


def _schedule(value: Any, path: str) -> list[tuple[float, float]]:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of [time_s, capacity_bps] pairs")
    steps = []
    for i, item in enumerate(value):
        where = f"{path}[{i}]"
        if isinstance(item, dict):
            item = [item.get("time"), item.get("capacity_bps")]
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise ConfigError(where, "expected [time_s, capacity_bps]")
        t, c = item
        for v in (t, c):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(where, f"expected numbers, got {item!r}")
        if t < 0:
            raise ConfigError(where, "time must be >= 0")
        if c <= 0:
            raise ConfigError(where, "capacity must be positive")
        if steps and t <= steps[-1][0]:
            raise ConfigError(where, "times must be strictly increasing")
        steps.append((float(t), float(c)))
    return steps


def parse_config(doc: Any, base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping")
    _check_keys(doc, {"version", "name", "sample_rate", "frame_length", "bit_depth", "max_order", "duration",
                      "seed", "sources", "link", "adaptation", "receiver", "stimulus", "outputs"}, "")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError("version", f"unsupported config version {version!r} (expected {CONFIG_VERSION})")

    raw_sources = doc.get("sources")
    if not isinstance(raw_sources, list) or not raw_sources:
        raise ConfigError("sources", "expected a non-empty list")
    sources = []
    for i, s in enumerate(raw_sources):
        where = f"sources[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(where, "expected a mapping")
        _check_keys(s, {"name", "signal", "trajectory"}, where)
        if "signal" not in s:
            raise ConfigError(f"{where}.signal", "required")
        sources.append(SourceSpec(
            _signal(s["signal"], f"{where}.signal"),
            _trajectory(s.get("trajectory", {}), f"{where}.trajectory"),
            str(s.get("name", f"source{i}")),
        ))

    cfg = ScenarioConfig(sources=sources, base_dir=Path(base_dir) if base_dir else Path.cwd())
    cfg.name = str(doc.get("name", "scene"))
    cfg.sample_rate = _number(doc, "sample_rate", "", 48000, lo=1, integer=True)
    cfg.frame_length = _number(doc, "frame_length", "", 128, lo=1, hi=0xFFFF, integer=True)
    cfg.bit_depth = _choice(doc, "bit_depth", "", 16, BIT_DEPTHS)
    cfg.max_order = _number(doc, "max_order", "", 3, lo=0, hi=MAX_ORDER, integer=True)
    cfg.duration = _number(doc, "duration", "", 10.0, lo=0.0, lo_open=True)
    cfg.seed = _number(doc, "seed", "", 0, lo=0, hi=2**63 - 1, integer=True)

    d = _section(doc, "link", "link")
    _check_keys(d, {"capacity_bps", "queue_limit", "propagation_delay", "jitter_stddev", "loss_probability",
                    "schedule"}, "link")
    cfg.link = LinkSpec(
        capacity_bps=_number(d, "capacity_bps", "link", 13e6, lo=0.0, lo_open=True),
        queue_limit=_number(d, "queue_limit", "link", 64 * 1024, lo=0, integer=True),
        propagation_delay=_number(d, "propagation_delay", "link", 0.020, lo=0.0),
        jitter_stddev=_number(d, "jitter_stddev", "link", 0.0, lo=0.0),
        loss_probability=_number(d, "loss_probability", "link", 0.0, lo=0.0, hi=1.0),
        schedule=_schedule(d.get("schedule"), "link.schedule"),
    )

    d = _section(doc, "adaptation", "adaptation")
    _check_keys(d, {"threshold_bps", "window", "hysteresis_hold"}, "adaptation")
    cfg.adaptation = AdaptationSpec(
        threshold_bps=_number(d, "threshold_bps", "adaptation", 2e6, lo=0.0, lo_open=True),
        window=_number(d, "window", "adaptation", 0.1, lo=0.0, lo_open=True),
        hysteresis_hold=_number(d, "hysteresis_hold", "adaptation", 2.0, lo=0.0),
    )

    d = _section(doc, "receiver", "receiver")
    _check_keys(d, {"jitter_depth", "layout"}, "receiver")
    layout = d.get("layout", "tdesign-6-36")
    if not isinstance(layout, str):
        raise ConfigError("receiver.layout", "expected a builtin grid name or a file path")
    if layout not in BUILTIN_GRIDS and not (cfg.base_dir / layout).is_file():
        raise ConfigError("receiver.layout", f"{layout!r} is neither a builtin grid ({', '.join(BUILTIN_GRIDS)}) nor a file")
    cfg.receiver = ReceiverSpec(_number(d, "jitter_depth", "receiver", 4, lo=0, integer=True), layout)

    d = _section(doc, "stimulus", "stimulus")
    _check_keys(d, {"kind", "drop_time", "drop_to_bps", "threshold_bps", "fade_duration", "loss_probability"},
                "stimulus")
    cfg.stimulus = StimulusSpec(
        kind=_choice(d, "kind", "stimulus", "reference", STIMULUS_KINDS),
        drop_time=_number(d, "drop_time", "stimulus", None, lo=0.0),
        drop_to_bps=_number(d, "drop_to_bps", "stimulus", 4e6, lo=0.0, lo_open=True),
        threshold_bps=_number(d, "threshold_bps", "stimulus", None, lo=0.0, lo_open=True),
        fade_duration=_number(d, "fade_duration", "stimulus", 1.0, lo=0.0),
        loss_probability=_number(d, "loss_probability", "stimulus", 0.05, lo=0.0, hi=1.0),
    )
    _check_fade(cfg.stimulus.fade_duration, cfg.sample_rate, "stimulus.fade_duration")
    if cfg.stimulus.drop_time is not None and cfg.stimulus.drop_time >= cfg.duration:
        raise ConfigError("stimulus.drop_time", "must fall inside the scene duration")
    if cfg.stimulus.kind == "first_order" and cfg.max_order < 1:
        raise ConfigError("stimulus.kind", "first_order needs max_order >= 1")

    d = _section(doc, "outputs", "outputs")
    _check_keys(d, {"audio", "trace", "loudspeakers", "capture"}, "outputs")
    out = OutputSpec()
    for key in ("audio", "trace", "loudspeakers", "capture"):
        value = d.get(key, getattr(out, key))
        if value is not None and (not isinstance(value, str) or not value):
            raise ConfigError(f"outputs.{key}", "expected a file name")
        setattr(out, key, value)
    if out.audio is None or out.trace is None:
        raise ConfigError("outputs", "audio and trace are required")
    cfg.outputs = out
    return cfg


def _check_fade(seconds: float, sample_rate: int, path: str) -> None:
    if round(seconds * sample_rate) > 0xFFFF:
        raise ConfigError(path, f"{seconds} s exceeds the 65535-sample fade_remaining field at {sample_rate} Hz")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from exc
    return parse_config(doc, path.parent)
