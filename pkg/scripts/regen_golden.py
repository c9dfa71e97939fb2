"""Regenerate the frozen golden traces under tests/golden/.

Only run this after an intentional behaviour change; the tests compare
fresh runs byte-for-byte against these files.
"""

from pathlib import Path

from hoadapt.scenario import load_config, run_stimulus
from hoadapt.scenario.trace import write_trace

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden"

CASES = {
    "reaction_inst.csv": ("reaction.yaml", "instantaneous"),
    "azimuth_sweep_inst.csv": ("azimuth_sweep.yaml", "instantaneous"),
}


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for out, (cfg_name, kind) in CASES.items():
        cfg = load_config(ROOT / "configs" / cfg_name)
        res = run_stimulus(cfg, kind=kind)
        write_trace(res.session.trace, GOLDEN / out)
        print(f"wrote {out}: {len(res.session.trace)} rows")


if __name__ == "__main__":
    main()
