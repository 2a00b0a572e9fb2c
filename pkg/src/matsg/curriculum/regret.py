"""Maximum Monte Carlo regret."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RegretEstimate:
    value: float
    horizon_terms: int
    r_max_used: float

    def __post_init__(self):
        if self.horizon_terms < 1:
            raise ValueError("horizon_terms must be >= 1")


def mm_regret(values: Sequence[float], r_max: float) -> RegretEstimate:
    """Mean over visited states of ``r_max - V(s_t)``, clamped below at 0.

    ``values`` are the value-head estimates recorded during the rollout and
    ``r_max`` is the best episodic return observed so far for the scenario.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("mm_regret needs at least one value estimate")
    if not all(math.isfinite(v) for v in values) or not math.isfinite(r_max):
        raise ValueError("mm_regret inputs must be finite")
    total = 0.0
    for v in values:
        total += r_max - v
    return RegretEstimate(max(0.0, total / len(values)), len(values), float(r_max))
