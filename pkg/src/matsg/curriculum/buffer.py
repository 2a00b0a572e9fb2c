"""Bounded level buffer with rank and staleness prioritized replay."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..scenario import ScenarioParams

SNAPSHOT_COLUMNS = ("params", "regret", "last_sampled_step", "insert_step", "max_return_seen")


@dataclass
class BufferEntry:
    params: ScenarioParams
    regret_score: float
    last_sampled_step: int
    insert_step: int
    max_return_seen: float = -math.inf
    order: int = 0  # insertion ordinal, breaks ties between equal scores


class LevelBuffer:
    """At most ``capacity`` scenarios scored by regret.

    Replay weights mix a rank term ``(1/rank)^(1/beta)`` with a staleness
    term proportional to the steps since each entry was last sampled.
    """

    def __init__(self, capacity: int = 256, beta: float = 0.3, rho: float = 0.3, rank_prioritized: bool = True):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if beta <= 0:
            raise ValueError("beta must be positive")
        if not 0 <= rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        self.capacity = capacity
        self.beta = beta
        self.rho = rho
        self.rank_prioritized = rank_prioritized
        self.entries: list[BufferEntry] = []
        self._by_key: dict[tuple, BufferEntry] = {}
        self._order = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, params: ScenarioParams) -> bool:
        return params.key() in self._by_key

    def get(self, params: ScenarioParams) -> BufferEntry | None:
        return self._by_key.get(params.key())

    def insert(self, params: ScenarioParams, regret: float, step: int = 0, max_return: float = -math.inf) -> bool:
        """Add or rescore ``params``; returns False when the insert was a no-op."""
        if not regret >= 0 or not math.isfinite(regret):
            raise ValueError(f"regret must be finite and non-negative, got {regret!r}")
        old = self._by_key.get(params.key())
        if old is not None:
            old.regret_score = max(old.regret_score, regret)
            old.max_return_seen = max(old.max_return_seen, max_return)
            return True
        if len(self.entries) >= self.capacity:
            victim = min(self.entries, key=lambda e: (e.regret_score, e.insert_step, e.order))
            if regret <= victim.regret_score:
                return False
            self.entries.remove(victim)
            del self._by_key[victim.params.key()]
        self._order += 1
        entry = BufferEntry(params, float(regret), step, step, max_return, self._order)
        self.entries.append(entry)
        self._by_key[params.key()] = entry
        return True

    def rescore(self, params: ScenarioParams, regret: float, max_return: float) -> None:
        """Overwrite the score of a replayed entry with its fresh estimate."""
        if not regret >= 0 or not math.isfinite(regret):
            raise ValueError(f"regret must be finite and non-negative, got {regret!r}")
        entry = self._by_key[params.key()]
        entry.regret_score = float(regret)
        entry.max_return_seen = max(entry.max_return_seen, max_return)

    def sampling_weights(self, current_step: int) -> np.ndarray:
        n = len(self.entries)
        if n == 0:
            raise ValueError("buffer is empty")
        scores = np.array([e.regret_score for e in self.entries])
        if self.rank_prioritized:
            order = sorted(range(n), key=lambda i: (-scores[i], self.entries[i].order))
            ranks = np.empty(n)
            ranks[order] = np.arange(1, n + 1)
            h = (1.0 / ranks) ** (1.0 / self.beta)
        else:
            h = scores ** (1.0 / self.beta)
            if h.sum() <= 0:
                h = np.ones(n)
        p_score = h / h.sum()
        stale = np.array([current_step - e.last_sampled_step for e in self.entries], dtype=float)
        p_stale = stale / stale.sum() if stale.sum() > 0 else np.full(n, 1.0 / n)
        w = (1 - self.rho) * p_score + self.rho * p_stale
        return w / w.sum()

    def sample_indices(self, current_step: int, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` indices from the current weights without touching staleness."""
        return rng.choice(len(self.entries), size=size, p=self.sampling_weights(current_step))

    def sample(self, current_step: int, rng: np.random.Generator) -> ScenarioParams:
        i = int(rng.choice(len(self.entries), p=self.sampling_weights(current_step)))
        self.entries[i].last_sampled_step = current_step
        return self.entries[i].params

    def mean_regret(self) -> float:
        return float(np.mean([e.regret_score for e in self.entries])) if self.entries else float("nan")

    def snapshot_rows(self) -> list[tuple]:
        return [
            (e.params.to_text(), repr(e.regret_score), e.last_sampled_step, e.insert_step, repr(float(e.max_return_seen)))
            for e in self.entries
        ]

    def write_snapshot(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SNAPSHOT_COLUMNS)
            w.writerows(self.snapshot_rows())


def read_snapshot(path, spec=None) -> list[BufferEntry]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            params = ScenarioParams.from_text(row["params"], spec.name if spec else "unnamed", spec)
            out.append(BufferEntry(params, float(row["regret"]), int(row["last_sampled_step"]),
                                   int(row["insert_step"]), float(row["max_return_seen"]), i))
    return out


def buffer_insert(buffer: LevelBuffer, params: ScenarioParams, regret: float, step: int = 0) -> LevelBuffer:
    """Functional-style wrapper around :meth:`LevelBuffer.insert` (mutates and returns ``buffer``)."""
    buffer.insert(params, regret, step)
    return buffer


def buffer_sample(buffer: LevelBuffer, current_step: int, rng: np.random.Generator) -> ScenarioParams:
    return buffer.sample(current_step, rng)
