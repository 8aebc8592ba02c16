"""Experiment reports, slope fits and the shared task runner."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

CSV_COLUMNS = ("delta", "lhs", "rhs", "ratio", "log_delta", "log_ratio")


def thread_count() -> int:
    """Worker cap from BLTK_THREADS (default 1)."""
    raw = os.environ.get("BLTK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Map in a thread pool; results come back in input order."""
    items = list(items)
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fit_slope(deltas: Sequence[float], values: Sequence[float], last: int = 4) -> float:
    """Least-squares slope of log(value) against log(delta) over the smallest deltas."""
    pairs = sorted(zip(deltas, values))[:last]
    if len(pairs) < 2:
        raise ValueError("need at least two scales to fit a slope")
    x = np.log([d for d, _ in pairs])
    y = np.log([v for _, v in pairs])
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class Measurement:
    delta: float
    lhs: float
    rhs: float
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def row(self) -> dict:
        return {
            "delta": self.delta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "log_delta": math.log(self.delta),
            "log_ratio": math.log(self.ratio) if self.ratio > 0 else -math.inf,
        }


@dataclass
class ExperimentReport:
    kind: str
    inputs: dict
    measurements: list
    slope: float | None
    predicted: float | None
    tolerance: float
    passed: bool
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        rows = []
        for m in self.measurements:
            r = m.row()
            r.update(m.extra)
            rows.append({k: _finite(v) for k, v in r.items()})
        return {
            "kind": self.kind,
            "inputs": self.inputs,
            "measurements": rows,
            "slope": _finite(self.slope),
            "predicted": _finite(self.predicted),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "notes": self.notes,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in self.measurements:
            r = m.row()
            w.writerow([repr(float(r[c])) for c in CSV_COLUMNS])
        return buf.getvalue()


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x
