"""Signalized four-way intersection environment."""

from __future__ import annotations

import csv
from typing import Mapping

import numpy as np

from ..posg import TERMINATING, TRUNCATING, AgentId, EnvError, StepResult
from ..scenario import ScenarioParams, ScenarioSpec
from . import actions as A
from .birdview import BirdviewObservation, MapRaster, rasterize_birdview
from .controllers import held_by_signal, macro_controller, npc_policy, waypoint_controller
from .kinematics import DT, VehicleState, advance_kinematics
from .reward import cruise_term
from .roadmap import APPROACHES, MANEUVERS, RoadMap, default_map
from .world import (
    ACTIVE,
    HORIZON,
    NpcBehaviorConfig,
    Vehicle,
    WorldState,
    apply_events,
    detect_events,
)

KNOBS = (
    "ego.route",
    "ego.v_target",
    "npc.count",
    "npc.target_speed",
    "npc.keeps_safety_distance",
    "npc.respects_traffic_lights",
)
DEFAULT_V_TARGET = 8.0
EGO_SLOT = 0  # index of the spawn slot nearest the box in SPAWN_DISTANCES order


class IntersectionEnv:
    """Multi-agent environment over :class:`WorldState`.

    Controlled agents get ids ``0..n-1``; NPCs follow.  Every decision
    persists for ``actions.PERSISTENCE[action_kind]`` control ticks.
    """

    def __init__(self, spec: ScenarioSpec, roadmap: RoadMap | None = None, action_kind: str = "macro",
                 horizon: int = HORIZON, record_trace: bool = False):
        if action_kind not in A.PERSISTENCE:
            raise ValueError(f"unknown action kind {action_kind!r}")
        self.spec = spec
        self.roadmap = roadmap or default_map()
        unknown = [k for k in spec.bindings if k not in KNOBS]
        if unknown:
            raise ValueError(f"unknown simulator knobs {unknown}; known: {KNOBS}")
        self.action_kind = action_kind
        self.ticks_per_action = A.PERSISTENCE[action_kind]
        self.horizon = horizon
        self.raster = MapRaster(self.roadmap)
        self.record_trace = record_trace
        self.trace: list[tuple] = []
        self.world: WorldState | None = None
        self._done: set[AgentId] = set()
        self._n_agents = 0

    # ------------------------------------------------------------ reset

    def _knob(self, params: ScenarioParams, knob: str, default):
        name = self.spec.bindings.get(knob)
        return default if name is None else params[name]

    def reset(self, params: ScenarioParams) -> dict[AgentId, BirdviewObservation]:
        if self.spec.map_id != self.roadmap.name:
            raise EnvError(f"unknown map_id {self.spec.map_id!r} (loaded map is {self.roadmap.name!r})")
        try:
            params.validate(self.spec)
        except (ValueError, KeyError) as exc:
            raise EnvError(f"parameter out of domain: {exc}") from exc

        rng = np.random.default_rng(params.seed)
        n_ego = self.spec.ego_role.count
        if n_ego > len(APPROACHES):
            raise EnvError("at most one controlled agent per approach")
        signal_offset = float(rng.uniform(0.0, max(s.cycle for s in self.roadmap.signals))) if self.roadmap.signals else 0.0
        ego_route = self._knob(params, "ego.route", None)
        v_target = float(self._knob(params, "ego.v_target", DEFAULT_V_TARGET))
        n_npc = int(self._knob(params, "npc.count", 0))
        npc_cfg = NpcBehaviorConfig(
            float(self._knob(params, "npc.target_speed", 8.0)),
            bool(self._knob(params, "npc.keeps_safety_distance", True)),
            bool(self._knob(params, "npc.respects_traffic_lights", True)),
        )
        if ego_route is not None and ego_route not in MANEUVERS:
            raise EnvError(f"ego.route must be one of {MANEUVERS}, got {ego_route!r}")

        approaches = [APPROACHES[i] for i in rng.permutation(len(APPROACHES))]
        vehicles: list[Vehicle] = []
        lane_slots = {a: [sl for sl in self.roadmap.spawn_slots if sl[0] == self.roadmap.incoming_lane(a)]
                      for a in APPROACHES}
        for lane in lane_slots.values():
            lane.sort(key=lambda sl: -sl[1])  # nearest to the box first
        for i in range(n_ego):
            appr = approaches[i]
            maneuver = ego_route if ego_route is not None else MANEUVERS[int(rng.integers(len(MANEUVERS)))]
            slot = lane_slots[appr][EGO_SLOT]
            vehicles.append(self._spawn(len(vehicles), slot, appr, maneuver, "controlled"))

        # controlled agents' lanes stay free of NPCs, so a standing agent is never rear-ended
        ego_lanes = set(approaches[:n_ego])
        free = {a: ([] if a in ego_lanes else list(lane_slots[a])) for a in APPROACHES}
        if n_npc > sum(len(v) for v in free.values()):
            raise EnvError(f"parameter out of domain: npc.count={n_npc} exceeds free spawn slots")
        # round-robin over lanes in a seeded order so NPCs spread across approaches
        lane_order = [APPROACHES[i] for i in rng.permutation(len(APPROACHES))]
        placed = 0
        k = 0
        while placed < n_npc:
            appr = lane_order[k % len(lane_order)]
            k += 1
            if not free[appr]:
                continue
            slot = free[appr].pop(int(rng.integers(len(free[appr]))))
            maneuver = MANEUVERS[int(rng.integers(len(MANEUVERS)))]
            veh = self._spawn(len(vehicles), slot, appr, maneuver, "npc")
            veh.npc = npc_cfg
            vehicles.append(veh)
            placed += 1

        self.world = WorldState(self.roadmap, vehicles, signal_offset, v_target, self.horizon)
        self._n_agents = n_ego
        self._p0 = [v.state.p for v in vehicles[:n_ego]]
        self._done = set()
        self.trace = []
        if self.record_trace:
            self._record()
        return {a: self.observe(a) for a in range(n_ego)}

    def _spawn(self, vid: int, slot, approach: str, maneuver: str, role: str) -> Vehicle:
        route = self.roadmap.route_for(approach, maneuver)
        x, y, h = self.roadmap.slot_pose(slot)
        p = float(slot[1])  # incoming lane is the first lane of every route
        return Vehicle(vid, VehicleState(x, y, h, 0.0, route.name, p, role), route.name, p)

    # ------------------------------------------------------------ step

    def active_agents(self) -> list[AgentId]:
        return [a for a in range(self._n_agents) if a not in self._done]

    def route_completion(self, agent: AgentId) -> float:
        """Fraction of the remaining route covered since reset, in [0, 1]."""
        veh = self.world.vehicles[agent]
        if veh.status == "finished":
            return 1.0
        span = self.world.route(veh.state.route).length - self._p0[agent]
        return min(max((veh.state.p - self._p0[agent]) / span, 0.0), 1.0)

    def return_upper_bound(self, agent: AgentId) -> float:
        """Remaining route length plus one cruise unit per possible decision."""
        veh = self.world.vehicles[agent]
        decisions = -(-self.horizon // self.ticks_per_action)
        return self.world.route(veh.state.route).length - self._p0[agent] + decisions

    def observe(self, agent: AgentId) -> BirdviewObservation:
        return rasterize_birdview(self.world, agent, self.raster)

    def decode_action(self, agent: AgentId, index: int):
        if self.action_kind == "continuous":
            return A.decode_continuous(int(index))
        if self.action_kind == "waypoint":
            st = self.world.vehicles[agent].state
            return A.decode_waypoint(int(index), self.world.route(st.route).polyline, st.p)
        return A.decode_macro(int(index))

    def _control(self, veh: Vehicle, action) -> tuple[float, float]:
        st = veh.state
        if isinstance(action, A.Continuous):
            return action.throttle, action.steer
        if isinstance(action, A.Waypoint):
            throttle, steer, veh.prev_err = waypoint_controller(st, action.target, self.world.v_target, veh.prev_err)
            return throttle, steer
        return macro_controller(st, action.command, self.world, veh.vid)

    def step(self, joint: Mapping[AgentId, object]) -> StepResult:
        if self.world is None:
            raise EnvError("step() called before reset()")
        active = self.active_agents()
        if not active:
            raise EnvError("episode has ended; call reset()")
        extra = set(joint) - set(active)
        if extra:
            raise EnvError(f"actions given for terminated or unknown agents {sorted(extra)}")
        missing = set(active) - set(joint)
        if missing:
            raise EnvError(f"missing actions for agents {sorted(missing)}")
        expected = A.ACTION_TYPES[self.action_kind]
        for a, act in joint.items():
            if not isinstance(act, expected):
                raise EnvError(f"agent {a}: expected {expected.__name__} action, got {type(act).__name__}")
            if isinstance(act, A.Waypoint):
                st = self.world.vehicles[a].state
                if np.hypot(act.target[0] - st.x, act.target[1] - st.y) > A.WAYPOINT_RANGE + 1e-9:
                    raise EnvError(f"agent {a}: waypoint further than {A.WAYPOINT_RANGE} m")

        world = self.world
        if self.action_kind == "waypoint":
            for a in active:
                world.vehicles[a].prev_err = None  # new target, no derivative kick
        p_start = {a: world.vehicles[a].state.p for a in active}
        cruise = {a: [] for a in active}
        events = []
        running = set(active)
        for _ in range(self.ticks_per_action):
            controls = {}
            for veh in world.vehicles:
                if veh.status != ACTIVE:
                    continue
                if veh.controlled:
                    controls[veh.vid] = self._control(veh, joint[veh.vid])
                else:
                    controls[veh.vid] = npc_policy(veh.state, veh.npc, world, veh.vid)
            for vid, (throttle, steer) in controls.items():
                veh = world.vehicles[vid]
                veh.state = advance_kinematics(veh.state, throttle, steer, DT)
                world.update_progress(veh)
            world.tick += 1
            moving = [v for v in world.vehicles if v.status == ACTIVE]
            # waiting at a red light is not a deadlock: the signal will release the scene
            if (moving and all(v.state.speed < 0.1 for v in moving)
                    and not any(held_by_signal(world, v.vid) for v in moving)):
                world.still_ticks += 1
            else:
                world.still_ticks = 0
            for a in running:
                cruise[a].append(cruise_term(world.vehicles[a].state.speed, world.v_target))
            tick_events = detect_events(world)
            apply_events(world, tick_events)
            events += [e for e in tick_events if e.agent < self._n_agents]
            running -= {e.agent for e in tick_events}
            if self.record_trace:
                self._record()
            if not running:
                break

        terminated = {a: False for a in active}
        truncated = {a: False for a in active}
        for e in events:
            if e.kind in TERMINATING:
                terminated[e.agent] = True
            elif e.kind in TRUNCATING:
                truncated[e.agent] = True
        rewards = {}
        for a in active:
            p_end = world.vehicles[a].state.p
            rewards[a] = (p_end - p_start[a]) + sum(cruise[a]) / len(cruise[a])
            if terminated[a] or truncated[a]:
                self._done.add(a)
        obs = {a: self.observe(a) for a in active}
        return StepResult(obs, rewards, terminated, truncated, events)

    # ------------------------------------------------------------ traces

    def _record(self) -> None:
        for v in self.world.vehicles:
            st = v.state
            self.trace.append((self.world.tick, v.vid, st.x, st.y, st.heading, st.speed, st.p))

    def write_trace(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tick", "id", "x", "y", "heading", "speed", "p"])
            for row in self.trace:
                w.writerow([row[0], row[1]] + [repr(float(x)) for x in row[2:]])
