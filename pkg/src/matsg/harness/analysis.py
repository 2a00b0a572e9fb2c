"""Summaries of training-scenario distributions and buffer regret."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..scenario import ScenarioParams
from .metrics import fmt

PARAM_SUMMARY_COLUMNS = (
    "checkpoint", "n", "frac_straight", "frac_left", "frac_right", "mean_npc_count",
    "frac_no_safety_distance", "frac_ignores_lights", "mean_npc_target_speed",
)
MANEUVERS = ("straight", "left", "right")
NPC_BUCKETS = ((0,), (1, 2), (3, 4), (5, 6))
BUCKET_LABELS = ("0", "1-2", "3-4", "5-6")


def _assignment(p) -> dict:
    return p.as_dict() if isinstance(p, ScenarioParams) else dict(p)


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def analyze_params(snapshots) -> list[dict]:
    """One summary row per checkpoint.

    ``snapshots`` is a sequence of (label, assignments) pairs, or just a
    sequence of assignment lists, where each assignment is a
    :class:`ScenarioParams` or a name-to-value mapping.  Statistics whose
    parameter never occurs are ``None``.
    """
    rows = []
    for i, snap in enumerate(snapshots):
        label, items = snap if isinstance(snap, tuple) else (i, snap)
        items = [_assignment(p) for p in items]
        routes = [a["route"] for a in items if "route" in a]
        row = {"checkpoint": label, "n": len(items)}
        for m in MANEUVERS:
            row[f"frac_{m}"] = _mean([r == m for r in routes])
        row["mean_npc_count"] = _mean([a["npc_count"] for a in items if "npc_count" in a])
        row["frac_no_safety_distance"] = _mean(
            [not a["keeps_safety_distance"] for a in items if "keeps_safety_distance" in a])
        row["frac_ignores_lights"] = _mean(
            [not a["respects_traffic_lights"] for a in items if "respects_traffic_lights" in a])
        row["mean_npc_target_speed"] = _mean([a["npc_target_speed"] for a in items if "npc_target_speed" in a])
        rows.append(row)
    return rows


def write_param_summary(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PARAM_SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["checkpoint"], r["n"]] + [fmt(r[c]) for c in PARAM_SUMMARY_COLUMNS[2:]])


@dataclass
class RegretMatrix:
    label: object
    mean: np.ndarray  # maneuver x npc bucket; NaN where empty
    count: np.ndarray
    entropy: float


def _bucket(n: int) -> int:
    for j, b in enumerate(NPC_BUCKETS):
        if n in b:
            return j
    raise ValueError(f"npc_count {n} outside the analysed buckets")


def normalized_entropy(matrix: np.ndarray) -> float:
    """Shannon entropy of the non-negative cell masses divided by log(cells).

    Empty (NaN) cells count as zero mass; a matrix without mass yields NaN.
    """
    m = np.nan_to_num(np.asarray(matrix, dtype=float), nan=0.0).ravel()
    total = m.sum()
    if total <= 0 or m.size < 2:
        return math.nan if total <= 0 else 0.0
    p = m[m > 0] / total
    return max(0.0, float(-(p * np.log(p)).sum() / math.log(m.size)))


def analyze_buffer_regret(snapshots) -> list[RegretMatrix]:
    """Mean regret per (maneuver, npc-count bucket) for each buffer snapshot.

    Each snapshot is a (label, entries) pair or a bare entry list, entries
    being :class:`~matsg.curriculum.BufferEntry` objects or (params, regret)
    pairs.
    """
    out = []
    for i, snap in enumerate(snapshots):
        label, entries = snap if isinstance(snap, tuple) else (i, snap)
        total = np.zeros((len(MANEUVERS), len(NPC_BUCKETS)))
        count = np.zeros_like(total)
        for e in entries:
            params, regret = (e.params, e.regret_score) if hasattr(e, "params") else e
            a = _assignment(params)
            r, c = MANEUVERS.index(a["route"]), _bucket(int(a["npc_count"]))
            total[r, c] += regret
            count[r, c] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
        out.append(RegretMatrix(label, mean, count, normalized_entropy(mean)))
    return out


def write_regret_matrices(path, matrices) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "route", "npc_bucket", "mean_regret", "count", "entropy"])
        for m in matrices:
            for i, route in enumerate(MANEUVERS):
                for j, b in enumerate(BUCKET_LABELS):
                    w.writerow([m.label, route, b, fmt(m.mean[i, j]), int(m.count[i, j]), fmt(m.entropy)])
