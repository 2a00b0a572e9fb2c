"""Kinematic bicycle model."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

DT = 0.05
WHEELBASE = 2.7
MAX_ACCEL = 3.0
MAX_BRAKE = 6.0
MAX_STEER = 0.5
V_MAX = 15.0


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    route: str
    p: float = 0.0
    role: str = "npc"  # "controlled" | "npc"


def _clip(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def advance_kinematics(v: VehicleState, throttle: float, steer: float, dt: float = DT) -> VehicleState:
    """One semi-implicit Euler step: speed first, then position with the new
    speed along the current heading, then heading.

    ``throttle`` in [-1, 1] maps to acceleration (positive) or braking
    (negative); ``steer`` in [-1, 1] maps to the front-wheel angle, positive
    to the left.  Out-of-range inputs are clamped.
    """
    throttle = _clip(throttle, -1.0, 1.0)
    steer = _clip(steer, -1.0, 1.0)
    accel = throttle * (MAX_ACCEL if throttle >= 0 else MAX_BRAKE)
    speed = _clip(v.speed + accel * dt, 0.0, V_MAX)
    if speed == v.speed == 0.0:
        return v
    x = v.x + speed * math.cos(v.heading) * dt
    y = v.y + speed * math.sin(v.heading) * dt
    heading = v.heading + speed / WHEELBASE * math.tan(steer * MAX_STEER) * dt
    return replace(v, x=x, y=y, heading=heading, speed=speed)
