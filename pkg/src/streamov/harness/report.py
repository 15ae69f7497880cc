from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .engine import SessionTrace
from .evaluation import TriggerMetrics

STEP_COLUMNS = ("session", "step", "t", "short", "long", "snapshot", "decision", "latency_ms")


def write_step_csv(traces: Iterable[SessionTrace], path: str | Path) -> int:
    """Per-step memory occupancy, decisions and wall time. Returns the row count."""
    rows = 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(STEP_COLUMNS)
        for trace in traces:
            for step, timing in zip(trace.steps, trace.timings or [{}] * len(trace.steps)):
                decision = ";".join(d.decision for d in step.decisions)
                latency = 1000.0 * sum(timing.values())
                out.writerow(
                    [trace.session_id, step.step, repr(step.t), step.n_short, step.n_long,
                     step.n_snapshot, decision, f"{latency:.3f}"]
                )
                rows += 1
    return rows


def emit_report(traces: Iterable[SessionTrace], metrics: TriggerMetrics | None, path: str | Path) -> list[Path]:
    """Write ``metrics.json`` and ``steps.csv`` under ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if metrics is not None:
        metrics.write(out / "metrics.json")
        written.append(out / "metrics.json")
    write_step_csv(traces, out / "steps.csv")
    written.append(out / "steps.csv")
    return written
