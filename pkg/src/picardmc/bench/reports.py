"""CSV serialization of experiment results.

report.csv: one row per (seed, setting) with the fixed metric columns.
rounds.csv: per-round engine history of one run (round, G, L, evals_cumulative).

Files are byte-deterministic for identical configs and seeds; the only
non-data line is the leading version header.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Union

from .. import __version__
from ..engine import RunRecord

REPORT_COLUMNS = [
    "experiment",
    "seed",
    "kernel",
    "target",
    "d",
    "K",
    "N",
    "r",
    "J",
    "L",
    "G_hat",
    "M",
    "E",
    "acceptance",
]

VERSION_HEADER = f"# picardmc report v1 (picardmc {__version__})"


def _format(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_report(path: Union[str, Path], rows: Iterable[Dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(VERSION_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_format(row.get(col, "nan")) for col in REPORT_COLUMNS])


def write_rounds(path: Union[str, Path], record: RunRecord) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(VERSION_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(["round", "G", "L", "evals_cumulative"])
        for round_index, g, l_value, evals in record.rounds:
            writer.writerow([round_index, g, l_value, evals])


def read_report(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path} is missing the version header")
        return list(csv.DictReader(fh))
