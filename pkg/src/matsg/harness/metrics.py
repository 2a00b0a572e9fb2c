"""Long-format metrics CSVs and fixed-size binning."""

from __future__ import annotations

import csv
import math
from collections import defaultdict

import numpy as np

METRIC_COLUMNS = ("run", "seed", "step", "metric", "value")
BINNED_COLUMNS = ("run", "seed", "bin", "first_step", "last_step", "metric", "mean", "std", "n")


def fmt(x) -> str:
    """Stable text for a metric value (shortest round-trip repr)."""
    if x is None:
        return "NA"
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


class MetricsWriter:
    """Append-only writer for ``run,seed,step,metric,value`` rows."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(METRIC_COLUMNS)
        self._last: dict[tuple, int] = {}
        self.rows: list[tuple] = []

    def write(self, run: str, seed: int, step: int, metric: str, value) -> None:
        last = self._last.get((run, seed))
        if last is not None and step < last:
            raise ValueError(f"step went backwards in run {run}/{seed}: {step} < {last}")
        self._last[(run, seed)] = step
        row = (run, seed, step, metric, fmt(value))
        self.rows.append(row)
        self._w.writerow(row)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"] = int(r["seed"])
        r["step"] = int(r["step"])
        r["value"] = float(r["value"]) if r["value"] != "NA" else math.nan
    return rows


def bin_metrics(rows, k: int = 5) -> list[tuple]:
    """Mean and population std over consecutive groups of ``k`` steps.

    Rows are grouped per (run, seed, metric) in order of appearance; the
    final bin may hold fewer than ``k`` values.
    """
    if k <= 0:
        raise ValueError("bin size must be positive")
    series = defaultdict(list)
    for r in rows:
        series[(r["run"], int(r["seed"]), r["metric"])].append((int(r["step"]), float(r["value"])))
    out = []
    for (run, seed, metric), pts in series.items():
        for b in range(0, len(pts), k):
            chunk = pts[b:b + k]
            vals = np.array([v for _, v in chunk])
            out.append((run, seed, b // k, chunk[0][0], chunk[-1][0], metric, float(vals.mean()), float(vals.std()),
                        len(chunk)))
    return out


def write_binned(path, binned) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BINNED_COLUMNS)
        for row in binned:
            w.writerow([row[0], row[1], row[2], row[3], row[4], row[5], fmt(row[6]), fmt(row[7]), row[8]])
