from __future__ import annotations

import csv
from pathlib import Path

from .services import SpectrumEntry, analytic_nodal_count, is_generic


SPECTRUM_CSV_HEADER = [
    "index",
    "m",
    "n",
    "value",
    "value_over_pi2",
    "multiplicity",
    "courant_index",
    "max_nodal_count",
    "courant_sharp",
]


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def spectrum_rows(entries: list[SpectrumEntry], count: int) -> list[dict[str, str]]:
    """One row per spectral index 1..count; each mode repeats once per unit of multiplicity.

    max_nodal_count is left blank where the eigenvalue is shared by several mode pairs.
    """
    rows: list[dict[str, str]] = []
    index = 1
    for entry in entries:
        for mode in entry.modes:
            for _ in range(mode.multiplicity):
                if index > count:
                    return rows
                rows.append(
                    {
                        "index": str(index),
                        "m": str(mode.m),
                        "n": str(mode.n),
                        "value": _fmt(entry.value),
                        "value_over_pi2": _fmt(entry.value_over_pi2),
                        "multiplicity": str(entry.multiplicity),
                        "courant_index": str(entry.first_index),
                        "max_nodal_count": str(analytic_nodal_count(mode)) if is_generic([entry.modes]) else "",
                        "courant_sharp": str(entry.courant_sharp),
                    }
                )
                index += 1
    return rows


def write_spectrum_csv(path: Path, entries: list[SpectrumEntry], count: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SPECTRUM_CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(spectrum_rows(entries, count))
    return path
