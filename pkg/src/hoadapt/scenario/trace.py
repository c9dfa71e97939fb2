from __future__ import annotations

import csv

from ..pipeline.events import TRACE_FIELDS, TraceRow


def write_trace(rows: list[TraceRow], path) -> None:
    """CSV with a fixed header; integer fields only, so output is byte-stable."""
    last = None
    for r in rows:
        if last is not None and r.time_ns < last:
            raise ValueError("trace rows must be time-ordered")
        last = r.time_ns
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow(r.fields())


def read_trace(path) -> list[TraceRow]:
    def opt(v):
        return None if v == "" else int(v)

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_FIELDS:
            raise ValueError(f"unexpected trace header {header}")
        return [TraceRow(int(t), ev, opt(s), opt(o), opt(b), opt(q)) for t, ev, s, o, b, q in reader]
