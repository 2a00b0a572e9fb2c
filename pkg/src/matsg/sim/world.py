"""Simulator state and traffic-event detection."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from ..posg import Event
from .geometry import VEHICLE_LENGTH, rects_collide
from .kinematics import DT, V_MAX, VehicleState
from .roadmap import LANE_WIDTH, RoadMap, Route

ACTIVE = "active"
CRASHED = "crashed"
FINISHED = "finished"
OFF_ROUTE = "off_route"
TRUNCATED = "truncated"
_STATUS_CODES = {ACTIVE: 0, CRASHED: 1, FINISHED: 2, OFF_ROUTE: 3, TRUNCATED: 4}

HORIZON = 400
COMPLETE_TOLERANCE = 0.5
OFF_ROUTE_DISTANCE = 3.0
DEADLOCK_SPEED = 0.1
DEADLOCK_TICKS = 100
CORRIDOR_HALF_WIDTH = LANE_WIDTH / 2 + 0.5


@dataclass
class NpcBehaviorConfig:
    target_speed: float = 8.0
    keeps_safety_distance: bool = True
    respects_traffic_lights: bool = True

    def __post_init__(self):
        if not 0 < self.target_speed <= V_MAX:
            raise ValueError(f"target_speed must be in (0, {V_MAX}], got {self.target_speed}")


@dataclass
class Vehicle:
    vid: int
    state: VehicleState
    path: str  # route currently tracked by the built-in controllers
    s_path: float
    status: str = ACTIVE
    prev_err: float | None = None
    npc: NpcBehaviorConfig | None = None
    lateral: float = 0.0

    @property
    def controlled(self) -> bool:
        return self.state.role == "controlled"

    @property
    def present(self) -> bool:
        """Occupies road space (moving, or stopped after a crash)."""
        return self.status in (ACTIVE, CRASHED)

    @property
    def active(self) -> bool:
        return self.status == ACTIVE


class WorldState:
    def __init__(self, roadmap: RoadMap, vehicles: list[Vehicle], signal_offset: float = 0.0,
                 v_target: float = 8.0, horizon: int = HORIZON):
        self.roadmap = roadmap
        self.vehicles = vehicles
        self.signal_offset = signal_offset
        self.v_target = v_target
        self.horizon = horizon
        self.tick = 0
        self.still_ticks = 0

    @property
    def time(self) -> float:
        return self.tick * DT

    def route(self, name: str) -> Route:
        return self.roadmap.routes[name]

    def vehicle(self, vid: int) -> Vehicle:
        return self.vehicles[vid]

    def signal_state(self, approach: str) -> str:
        sig = self.roadmap.signal_for(approach)
        if sig is None:
            return "green"
        return sig.state(self.time + self.signal_offset)

    def find_leader(self, vid: int, path: Route, s: float, horizon: float = 40.0):
        """Nearest vehicle inside the corridor ahead along ``path``.

        Returns ``(gap, closing_speed_reference)`` as ``(gap, lead_speed)`` or
        ``None``; gap is bumper to bumper.
        """
        me = self.vehicles[vid].state
        best = None
        reach2 = (horizon + VEHICLE_LENGTH) ** 2
        for other in self.vehicles:
            if other.vid == vid or not other.present:
                continue
            o = other.state
            dx, dy = o.x - me.x, o.y - me.y
            if dx * dx + dy * dy > reach2:
                continue
            so, lat = path.polyline.project(o.x, o.y, s, s + horizon)
            if so <= s + 1e-6 or abs(lat) > CORRIDOR_HALF_WIDTH:
                continue
            gap = so - s - VEHICLE_LENGTH
            if best is None or gap < best[0]:
                h = path.polyline.point_at(so)[2]
                best = (gap, max(0.0, o.speed * math.cos(o.heading - h)))
        return best

    def update_progress(self, veh: Vehicle) -> None:
        st = veh.state
        route = self.route(st.route)
        s, lat = route.polyline.project(st.x, st.y, st.p - 2.0, st.p + 10.0)
        veh.lateral = lat
        if abs(lat) <= OFF_ROUTE_DISTANCE and s > st.p:
            veh.state = VehicleState(st.x, st.y, st.heading, st.speed, st.route, s, st.role)
        if veh.path == st.route:
            veh.s_path = veh.state.p if abs(lat) <= OFF_ROUTE_DISTANCE else veh.s_path
        else:
            path = self.route(veh.path)
            veh.s_path, _ = path.polyline.project(st.x, st.y, veh.s_path - 2.0, veh.s_path + 10.0)

    def serialize(self) -> bytes:
        """Canonical little-endian encoding of the full state."""
        routes = list(self.roadmap.routes)
        out = [struct.pack("<qqdI", self.tick, self.still_ticks, self.signal_offset, len(self.vehicles))]
        for v in self.vehicles:
            st = v.state
            out.append(struct.pack(
                "<IBBHH8d", v.vid, st.role == "controlled", _STATUS_CODES[v.status],
                routes.index(st.route), routes.index(v.path),
                st.x, st.y, st.heading, st.speed, st.p, v.s_path, v.lateral,
                math.nan if v.prev_err is None else v.prev_err,
            ))
        return b"".join(out)


def detect_events(world: WorldState) -> list[Event]:
    """Events for the current tick, one per affected vehicle.

    Pure: statuses are not modified (see :func:`apply_events`).
    """
    t = world.time
    events: list[Event] = []
    present = [v for v in world.vehicles if v.present]
    hit: set[int] = set()
    for i, a in enumerate(present):
        for b in present[i + 1:]:
            if not (a.active or b.active):
                continue
            sa, sb = a.state, b.state
            if rects_collide((sa.x, sa.y, sa.heading), (sb.x, sb.y, sb.heading)):
                hit.update(v.vid for v in (a, b) if v.active)
    for vid in sorted(hit):
        events.append(Event("collision", vid, t))
    for v in world.vehicles:
        if not v.active or v.vid in hit:
            continue
        if v.state.p >= world.route(v.state.route).length - COMPLETE_TOLERANCE:
            events.append(Event("route_complete", v.vid, t))
        elif abs(v.lateral) > OFF_ROUTE_DISTANCE:
            events.append(Event("off_route", v.vid, t))
    ended = {e.agent for e in events}
    remaining = [v for v in world.vehicles if v.active and v.vid not in ended]
    if world.still_ticks >= DEADLOCK_TICKS:
        events += [Event("deadlock", v.vid, t) for v in remaining if v.controlled]
    elif world.tick >= world.horizon:
        events += [Event("timeout", v.vid, t) for v in remaining if v.controlled]
    return events


_EVENT_STATUS = {
    "collision": CRASHED,
    "route_complete": FINISHED,
    "off_route": OFF_ROUTE,
    "deadlock": TRUNCATED,
    "timeout": TRUNCATED,
}


def apply_events(world: WorldState, events: list[Event]) -> None:
    for e in events:
        v = world.vehicles[e.agent]
        v.status = _EVENT_STATUS[e.kind]
        if v.status == CRASHED:
            st = v.state
            v.state = VehicleState(st.x, st.y, st.heading, 0.0, st.route, st.p, st.role)
