"""The three action abstractions and their discrete encodings for learning."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class MacroCommand(enum.IntEnum):
    FOLLOW_LANE = 0
    STOP = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3
    GO_STRAIGHT = 4


@dataclass(frozen=True)
class Continuous:
    throttle: float
    steer: float

    def __post_init__(self):
        if not (-1 <= self.throttle <= 1 and -1 <= self.steer <= 1):
            raise ValueError(f"continuous action out of range: {self}")


@dataclass(frozen=True)
class Waypoint:
    target: tuple[float, float]


@dataclass(frozen=True)
class Macro:
    command: MacroCommand


Action = Union[Continuous, Waypoint, Macro]

# control ticks each action persists for
PERSISTENCE = {"continuous": 2, "waypoint": 5, "macro": 10}
ACTION_TYPES = {"continuous": Continuous, "waypoint": Waypoint, "macro": Macro}
WAYPOINT_RANGE = 20.0

CONTINUOUS_BINS = np.linspace(-1.0, 1.0, 9)
# (distance ahead along route, lateral offset to the left)
WAYPOINT_CANDIDATES = (
    (3.0, 0.0),
    (8.0, 0.0),
    (14.0, 0.0),
    (8.0, 3.0),
    (14.0, 3.0),
    (8.0, -3.0),
    (14.0, -3.0),
)

N_ACTIONS = {
    "continuous": len(CONTINUOUS_BINS) ** 2,
    "waypoint": len(WAYPOINT_CANDIDATES),
    "macro": len(MacroCommand),
}


def decode_continuous(index: int) -> Continuous:
    n = len(CONTINUOUS_BINS)
    return Continuous(float(CONTINUOUS_BINS[index // n]), float(CONTINUOUS_BINS[index % n]))


def decode_waypoint(index: int, route_polyline, p: float) -> Waypoint:
    ahead, offset = WAYPOINT_CANDIDATES[index]
    x, y, h = route_polyline.point_at(p + ahead)
    return Waypoint((x - math.sin(h) * offset, y + math.cos(h) * offset))


def decode_macro(index: int) -> Macro:
    return Macro(MacroCommand(index))
