"""Command line entry point: ``hoadapt {run,stimuli,validate,wire-dump}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..wire import MalformedPacket, describe, parse_packet, read_capture
from .config import STIMULUS_KINDS, ConfigError, load_config
from .runner import run_all_stimuli, run_stimulus, scene_layout, stimulus_session
from .scene import build_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

OUT_DIR_ENV = "HOADAPT_OUT_DIR"

log = logging.getLogger("hoadapt")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoadapt", description="Adaptive-order Ambisonics streaming simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", type=Path, help=f"output directory (default: ${OUT_DIR_ENV} or the working directory)")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run the scene under its configured stimulus")
    run.add_argument("config", type=Path)
    run.add_argument("--stimulus", choices=STIMULUS_KINDS, help="override stimulus.kind")
    st = sub.add_parser("stimuli", parents=[common], help="emit all six stimulus variants of one scene")
    st.add_argument("config", type=Path)
    va = sub.add_parser("validate", parents=[common], help="check a config without running it")
    va.add_argument("config", type=Path)
    wd = sub.add_parser("wire-dump", parents=[common], help="print a packet capture as text")
    wd.add_argument("capture", type=Path)
    return p


def _out_dir(args) -> Path:
    if args.out_dir is not None:
        return args.out_dir
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path.cwd()


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        cfg.seed = args.seed
    return cfg


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _cmd_run(args) -> int:
    cfg = _load(args)
    if args.stimulus:
        cfg.stimulus.kind = args.stimulus
    res = run_stimulus(cfg, _out_dir(args))
    _say(args, f"{res.kind}: {len(res.session.frames)} frames, {res.session.concealed} concealed")
    for key, path in res.paths.items():
        _say(args, f"  {key}: {path}")
    return EXIT_OK


def _cmd_stimuli(args) -> int:
    cfg = _load(args)
    for kind, res in run_all_stimuli(cfg, _out_dir(args)).items():
        _say(args, f"{kind}: {res.session.concealed} concealed -> {res.paths['audio'].name}, {res.paths['trace'].name}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _load(args)
    build_scene(cfg)
    for kind in STIMULUS_KINDS:
        try:
            stimulus_session(cfg, kind)
        except ValueError as exc:
            raise ConfigError(f"stimulus[{kind}]", str(exc)) from exc
    try:
        scene_layout(cfg)
    except ValueError as exc:
        raise ConfigError("receiver.layout", str(exc)) from exc
    _say(args, f"{args.config}: ok")
    return EXIT_OK


def _cmd_wire_dump(args) -> int:
    bad = 0
    for i, (t_ns, data) in enumerate(read_capture(args.capture)):
        try:
            line = describe(parse_packet(data))
        except MalformedPacket as exc:
            bad += 1
            line = f"malformed ({exc.reason}) bytes={len(data)}"
        print(f"{i:6d} t={t_ns:>14d}ns {line}")
    if bad:
        log.warning("%d malformed packets", bad)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "stimuli": _cmd_stimuli, "validate": _cmd_validate, "wire-dump": _cmd_wire_dump}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
