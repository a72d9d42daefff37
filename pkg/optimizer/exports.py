from __future__ import annotations

import csv
import json
from pathlib import Path

from .services import PI2, TraceEntry


TRACE_CSV_HEADER = ["restart", "iteration", "max_energy", "max_over_pi2", "flips", "per_domain"]


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def trace_rows(trace: list[TraceEntry]) -> list[dict[str, str]]:
    return [
        {
            "restart": str(entry.restart),
            "iteration": str(entry.iteration),
            "max_energy": _fmt(entry.max_energy),
            "max_over_pi2": _fmt(entry.max_energy / PI2),
            "flips": str(entry.flips),
            "per_domain": ";".join(_fmt(value) for value in entry.per_domain),
        }
        for entry in trace
    ]


def write_trace_csv(path: Path, trace: list[TraceEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=TRACE_CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(trace_rows(trace))
    return path


def write_trace_json(path: Path, trace: list[TraceEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [
        {
            "restart": entry.restart,
            "iteration": entry.iteration,
            "max_energy": entry.max_energy,
            "max_over_pi2": entry.max_energy / PI2,
            "per_domain": list(entry.per_domain),
            "flips": entry.flips,
        }
        for entry in trace
    ]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
