"""Built-in low-level controllers: waypoint tracking, lane keeping with
IDM collision avoidance (macro actions), and scripted NPC drivers."""

from __future__ import annotations

import math

import numpy as np

from .actions import MacroCommand
from .geometry import VEHICLE_LENGTH, VEHICLE_WIDTH, rects_collide, wrap_angle
from .kinematics import DT, MAX_ACCEL, MAX_BRAKE, VehicleState
from .world import NpcBehaviorConfig, WorldState

K_P = 1.5
K_D = 0.3
K_SPEED = 1.0
COMFORT_BRAKE = 2.0  # b
IDM_S0 = 2.0
IDM_HEADWAY = 1.5  # T
IDM_DELTA = 4
LOOKAHEAD = 5.0
SPEED_PREVIEW = 15.0
HAZARD_HORIZON = 3.0  # s of constant-velocity prediction for crossing traffic
HAZARD_STEP = 0.25
HAZARD_MARGIN = 0.5  # footprint inflation (m) for predicted conflicts
HAZARD_MIN_SPEED = 0.5
HAZARD_RANGE = 35.0
MIN_PROBE_SPEED = 3.0  # a stopped vehicle checks the path as if pulling away
_HAZARD_TIMES = np.arange(1, int(round(HAZARD_HORIZON / HAZARD_STEP)) + 1) * HAZARD_STEP


def _clip1(v: float) -> float:
    return -1.0 if v < -1.0 else 1.0 if v > 1.0 else v


def accel_to_throttle(a: float) -> float:
    return _clip1(a / MAX_ACCEL if a >= 0 else a / MAX_BRAKE)


def heading_error(v: VehicleState, target) -> float:
    return wrap_angle(math.atan2(target[1] - v.y, target[0] - v.x) - v.heading)


def waypoint_controller(v: VehicleState, target, cruise: float = 8.0, prev_error: float | None = None,
                        stop_at_target: bool = True, dt: float = DT):
    """PD steering on heading error plus P speed control.

    With ``stop_at_target`` the speed set-point is capped by the comfortable
    stopping profile ``sqrt(2 b d)`` so the vehicle settles on the target.
    Returns ``(throttle, steer, heading_error)``; feed the error back in as
    ``prev_error`` on the next tick for the derivative term.
    """
    err = heading_error(v, target)
    derr = 0.0 if prev_error is None else wrap_angle(err - prev_error) / dt
    steer = _clip1(K_P * err + K_D * derr)
    v_des = cruise
    if stop_at_target:
        dist = math.hypot(target[0] - v.x, target[1] - v.y)
        v_des = min(cruise, math.sqrt(2 * COMFORT_BRAKE * dist))
    throttle = _clip1(K_SPEED * (v_des - v.speed))
    return throttle, steer, err


def idm_accel(speed: float, v0: float, gap: float, lead_speed: float) -> float:
    s_star = IDM_S0 + max(0.0, speed * IDM_HEADWAY + speed * (speed - lead_speed) / (2 * math.sqrt(MAX_ACCEL * COMFORT_BRAKE)))
    a = MAX_ACCEL * (1 - (speed / v0) ** IDM_DELTA - (s_star / max(gap, 0.1)) ** 2)
    return max(-MAX_BRAKE, min(MAX_ACCEL, a))


def _lane_keep(world: WorldState, vid: int, cruise: float):
    veh = world.vehicles[vid]
    path = world.route(veh.path)
    target = path.polyline.point_at(veh.s_path + LOOKAHEAD)
    v_des = min(cruise, path.speed_limit(veh.s_path, SPEED_PREVIEW))
    throttle, steer, err = waypoint_controller(veh.state, target, v_des, veh.prev_err, stop_at_target=False)
    veh.prev_err = err
    return throttle, steer, path


def _select_branch(world: WorldState, vid: int, command: MacroCommand) -> None:
    veh = world.vehicles[vid]
    path = world.route(veh.path)
    if veh.s_path >= path.entry_s:
        return  # already committed to a branch
    maneuver = {
        MacroCommand.TURN_LEFT: "left",
        MacroCommand.TURN_RIGHT: "right",
        MacroCommand.GO_STRAIGHT: "straight",
    }.get(command)
    if maneuver is not None:
        veh.path = world.roadmap.route_for(path.approach, maneuver).name


def _in_box(world: WorldState, x: float, y: float) -> bool:
    box = world.roadmap.box
    n = len(box)
    for i in range(n):
        x0, y0 = box[i]
        x1, y1 = box[(i + 1) % n]
        if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0:
            return False
    return True


def crossing_hazard(world: WorldState, vid: int, path, s: float):
    """Distance along ``path`` to the first predicted conflict we must yield to.

    Every moving vehicle ahead of us is extrapolated at constant velocity
    for :data:`HAZARD_HORIZON` seconds while we advance along ``path`` at
    our current speed (at least :data:`MIN_PROBE_SPEED`).  Standing
    vehicles are left to the lane-corridor leader check.  When the inflated
    footprints first overlap we yield if the other vehicle is already in
    the intersection box and we are not, or, with equal box status, if it
    is faster (ties go to the lower id).
    """
    me = world.vehicles[vid].state
    probe = max(me.speed, MIN_PROBE_SPEED)
    ch, sh = math.cos(me.heading), math.sin(me.heading)
    me_in = _in_box(world, me.x, me.y)
    length, width = VEHICLE_LENGTH + 2 * HAZARD_MARGIN, VEHICLE_WIDTH + 2 * HAZARD_MARGIN
    reach2 = length * length + width * width
    mine = None
    best = None
    for other in world.vehicles:
        if other.vid == vid or not other.active:
            continue
        o = other.state
        if o.speed < HAZARD_MIN_SPEED:
            continue
        dx, dy = o.x - me.x, o.y - me.y
        if dx * dx + dy * dy > HAZARD_RANGE**2 or dx * ch + dy * sh < 0:
            continue
        o_in = _in_box(world, o.x, o.y)
        if me_in and not o_in:
            continue
        if me_in == o_in and (me.speed, -vid) > (o.speed, -other.vid):
            continue
        if mine is None:
            mine = np.array([path.polyline.point_at(s + probe * t) for t in _HAZARD_TIMES])
        qx = o.x + o.speed * math.cos(o.heading) * _HAZARD_TIMES
        qy = o.y + o.speed * math.sin(o.heading) * _HAZARD_TIMES
        close = np.flatnonzero((mine[:, 0] - qx) ** 2 + (mine[:, 1] - qy) ** 2 <= reach2)
        for k in close:
            if rects_collide(tuple(mine[k]), (qx[k], qy[k], o.heading), length, width):
                gap = max(probe * _HAZARD_TIMES[k] - VEHICLE_LENGTH - HAZARD_MARGIN, 0.0)
                best = gap if best is None else min(best, gap)
                break
    return best


def macro_controller(v: VehicleState, command: MacroCommand, world: WorldState, vid: int):
    """Lane keeping along the commanded branch with built-in safety layers.

    Turn/straight commands pick the branch taken at the intersection and are
    ignored once the vehicle has entered it.  On top of lane keeping the
    controller brakes with IDM for the leader in its lane and for crossing
    traffic it has to yield to.  Signals are not observed by this layer;
    obeying them is left to the policy.  Returns ``(throttle, steer)``.
    """
    _select_branch(world, vid, command)
    throttle, steer, path = _lane_keep(world, vid, world.v_target)
    if command == MacroCommand.STOP:
        return -1.0, steer
    veh = world.vehicles[vid]
    leader = world.find_leader(vid, path, veh.s_path)
    if leader is not None:
        gap, lead_speed = leader
        throttle = min(throttle, accel_to_throttle(idm_accel(v.speed, world.v_target, gap, lead_speed)))
    hazard = crossing_hazard(world, vid, path, veh.s_path)
    if hazard is not None:
        throttle = min(throttle, accel_to_throttle(idm_accel(v.speed, world.v_target, hazard, 0.0)))
    return throttle, steer


def _stop_line_gap(world: WorldState, vid: int):
    veh = world.vehicles[vid]
    path = world.route(veh.path)
    gap = path.entry_s - (veh.s_path + VEHICLE_LENGTH / 2)
    if gap < 0:
        return None
    light = world.signal_state(path.approach)
    if light == "green":
        return None
    if light == "amber" and gap < veh.state.speed**2 / (2 * MAX_BRAKE):
        return None  # too late to stop
    return gap


def held_by_signal(world: WorldState, vid: int, reach: float = 10.0) -> bool:
    """True for a vehicle standing just before a stop line that is not green."""
    veh = world.vehicles[vid]
    if veh.state.speed >= 0.1:
        return False
    path = world.route(veh.path)
    gap = path.entry_s - (veh.s_path + VEHICLE_LENGTH / 2)
    return 0 <= gap <= reach and world.signal_state(path.approach) != "green"


def npc_policy(v: VehicleState, cfg: NpcBehaviorConfig, world: WorldState, vid: int):
    """Scripted driver following its route at ``cfg.target_speed``."""
    throttle, steer, path = _lane_keep(world, vid, cfg.target_speed)
    s = world.vehicles[vid].s_path
    if cfg.keeps_safety_distance:
        leader = world.find_leader(vid, path, s)
        if leader is not None:
            throttle = min(throttle, accel_to_throttle(idm_accel(v.speed, cfg.target_speed, *leader)))
    if cfg.respects_traffic_lights:
        gap = _stop_line_gap(world, vid)
        if gap is not None:
            throttle = min(throttle, accel_to_throttle(idm_accel(v.speed, cfg.target_speed, gap, 0.0)))
    return throttle, steer
