"""Result rows, summary statistics and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

CSV_HEADER = ("experiment", "snr_db", "metric", "value", "stderr", "trials", "seed")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    snr_db: float
    metric: str
    value: float
    stderr: float
    trials: int
    seed: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")


def mean_and_stderr(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and ``std / sqrt(n)`` (zero for a single sample)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def rate_rows(
    experiment: str, snr_db: float, name: str, errors: int, trials: int, seed: int
) -> list[ResultRow]:
    """Error-rate row plus its Wilson 95% interval bounds."""
    p = errors / trials
    se = math.sqrt(p * (1 - p) / trials)
    lo, hi = wilson_interval(errors, trials)
    return [
        ResultRow(experiment, snr_db, name, p, se, trials, seed),
        ResultRow(experiment, snr_db, f"{name}_ci_low", lo, 0.0, trials, seed),
        ResultRow(experiment, snr_db, f"{name}_ci_high", hi, 0.0, trials, seed),
    ]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    Path(path).write_bytes(rows_to_csv(rows).encode("utf-8"))


def read_csv(path: str | Path) -> list[ResultRow]:
    """Parse a results CSV back into rows."""
    types = [f.type for f in fields(ResultRow)]
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            vals = [
                float(v) if t == "float" else int(v) if t == "int" else v for v, t in zip(rec, types)
            ]
            out.append(ResultRow(*vals))
    return out


def find(rows: Iterable[ResultRow], metric: str, snr_db: float | None = None) -> ResultRow:
    for r in rows:
        if r.metric == metric and (snr_db is None or r.snr_db == snr_db):
            return r
    raise KeyError((metric, snr_db))
