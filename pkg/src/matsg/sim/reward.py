"""Progress plus cruise-speed reward."""

from __future__ import annotations

from typing import Sequence

from .kinematics import VehicleState


def cruise_term(speed: float, v_target: float) -> float:
    return min(speed / v_target, 1.0)


def compute_reward(prev: VehicleState, cur: VehicleState, v_target: float) -> float:
    """Single-tick reward: route progress since ``prev`` plus ``min(v/v_target, 1)``."""
    if v_target <= 0:
        raise ValueError("v_target must be positive")
    return (cur.p - prev.p) + cruise_term(cur.speed, v_target)


def decision_reward(p_start: float, p_end: float, speeds: Sequence[float], v_target: float) -> float:
    """Reward for one decision whose action persisted over ``len(speeds)`` ticks.

    Progress telescopes over the ticks; the cruise term is averaged.
    """
    if v_target <= 0:
        raise ValueError("v_target must be positive")
    if not speeds:
        return 0.0
    cruise = sum(cruise_term(s, v_target) for s in speeds) / len(speeds)
    return (p_end - p_start) + cruise
