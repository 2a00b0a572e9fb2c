"""Road network: lanes, routes, spawn slots and signal schedules.

Maps are stored as plain text, one record per line::

    map fourway
    box : x0 y0 x1 y1 ...
    lane S_in width 3.5 : x0 y0 x1 y1 ...
    lane S_left width 3.5 connector : ...
    marking : x0 y0 x1 y1
    route S_left approach S maneuver left : S_in S_left W_out
    spawn S_in 32.0
    signal NS green 15.0 amber 3.0 red 18.0 offset 0.0 approaches S N

``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations

import numpy as np

from .geometry import VEHICLE_LENGTH, Polyline, rects_collide

LANE_WIDTH = 3.5
BOX_HALF = 7.0
ARM_LENGTH = 40.0
SPAWN_DISTANCES = (8.0, 16.0, 24.0, 32.0)
APPROACHES = ("S", "E", "N", "W")
MANEUVERS = ("straight", "left", "right")
TURN_LAT_ACCEL = 3.0
V_MAX = 15.0


@dataclass
class Lane:
    name: str
    polyline: Polyline
    width: float = LANE_WIDTH
    connector: bool = False


@dataclass
class Route:
    name: str
    approach: str
    maneuver: str
    lanes: tuple[str, ...]
    polyline: Polyline = field(repr=False)
    entry_s: float = 0.0  # arc length where the route enters the intersection box
    exit_s: float = 0.0
    speed_limits: np.ndarray = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.polyline.length

    def speed_limit(self, s: float, lookahead: float = 0.0) -> float:
        step = 0.5
        i0 = max(0, int(s / step))
        i1 = min(len(self.speed_limits), int((s + lookahead) / step) + 1)
        if i0 >= len(self.speed_limits):
            return float(self.speed_limits[-1])
        return float(self.speed_limits[i0:max(i1, i0 + 1)].min())


@dataclass
class SignalSchedule:
    name: str
    green: float
    amber: float
    red: float
    offset: float
    approaches: tuple[str, ...]

    @property
    def cycle(self) -> float:
        return self.green + self.amber + self.red

    def state(self, t: float) -> str:
        phase = (t + self.offset) % self.cycle
        if phase < self.green:
            return "green"
        if phase < self.green + self.amber:
            return "amber"
        return "red"


@dataclass
class RoadMap:
    name: str
    lanes: dict[str, Lane]
    box: tuple[tuple[float, float], ...]
    markings: list[Polyline]
    routes: dict[str, Route]
    spawn_slots: list[tuple[str, float]]
    signals: list[SignalSchedule]

    def signal_for(self, approach: str) -> SignalSchedule | None:
        for sig in self.signals:
            if approach in sig.approaches:
                return sig
        return None

    def route_for(self, approach: str, maneuver: str) -> Route:
        for r in self.routes.values():
            if r.approach == approach and r.maneuver == maneuver:
                return r
        raise KeyError((approach, maneuver))

    def slot_pose(self, slot: tuple[str, float]):
        lane, s = slot
        return self.lanes[lane].polyline.point_at(s)

    def incoming_lane(self, approach: str) -> str:
        return self.route_for(approach, "straight").lanes[0]

    def validate(self) -> None:
        for lane in self.lanes.values():
            if _self_intersects(lane.polyline.points):
                raise ValueError(f"lane {lane.name} is self-intersecting")
        for r in self.routes.values():
            for a, b in zip(r.lanes, r.lanes[1:]):
                end = self.lanes[a].polyline.points[-1]
                start = self.lanes[b].polyline.points[0]
                if np.hypot(*(end - start)) > 1e-6:
                    raise ValueError(f"route {r.name}: lanes {a} and {b} are not connected")
        for s1, s2 in combinations(self.spawn_slots, 2):
            if s1[0] == s2[0] and abs(s1[1] - s2[1]) < VEHICLE_LENGTH:
                raise ValueError(f"spawn slots {s1} and {s2} overlap")
            if rects_collide(self.slot_pose(s1), self.slot_pose(s2)):
                raise ValueError(f"spawn slots {s1} and {s2} overlap")


def _self_intersects(pts: np.ndarray) -> bool:
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    segs = list(zip(pts[:-1], pts[1:]))
    for i, j in combinations(range(len(segs)), 2):
        if j == i + 1:
            continue
        (p1, p2), (q1, q2) = segs[i], segs[j]
        d1, d2 = cross(q1, q2, p1), cross(q1, q2, p2)
        d3, d4 = cross(p1, p2, q1), cross(p1, p2, q2)
        if d1 * d2 < 0 and d3 * d4 < 0:
            return True
    return False


def _build_route(name, approach, maneuver, lane_names, lanes) -> Route:
    pts = [lanes[lane_names[0]].polyline.points]
    for ln in lane_names[1:]:
        pts.append(lanes[ln].polyline.points[1:])
    poly = Polyline(np.concatenate(pts))
    entry = lanes[lane_names[0]].polyline.length
    exit_ = entry + sum(lanes[ln].polyline.length for ln in lane_names[1:-1])
    route = Route(name, approach, maneuver, tuple(lane_names), poly, entry, exit_)
    route.speed_limits = poly.curvature_speed_profile(TURN_LAT_ACCEL, V_MAX)
    return route


# ---------------------------------------------------------------- four-way map


def _rot(k: int, x: float, y: float):
    """Exact rotation by k quarter turns counter-clockwise."""
    for _ in range(k % 4):
        x, y = -y, x
    return x, y


def _arc(cx, cy, r, a0, a1, n):
    return [(cx + r * math.cos(a0 + (a1 - a0) * i / n), cy + r * math.sin(a0 + (a1 - a0) * i / n)) for i in range(n + 1)]


def fourway_map() -> RoadMap:
    """Signalized four-way intersection with two-lane arms (right-hand traffic)."""
    half = LANE_WIDTH / 2
    far = BOX_HALF + ARM_LENGTH
    # geometry for the south approach (driving north); others are rotations
    base = {
        "in": [(half, -far), (half, -BOX_HALF)],
        "out": [(-half, -BOX_HALF), (-half, -far)],
        "straight": [(half, -BOX_HALF), (half, BOX_HALF)],
        "right": _arc(BOX_HALF, -BOX_HALF, BOX_HALF - half, math.pi, math.pi / 2, 8),
        "left": _arc(-BOX_HALF, -BOX_HALF, BOX_HALF + half, 0.0, math.pi / 2, 12),
    }
    # for approach k, the destination side of each maneuver
    dest = {"straight": 2, "left": 3, "right": 1}

    lanes: dict[str, Lane] = {}
    markings = []
    for k, side in enumerate(APPROACHES):
        def rot(points):
            return [_rot(k, x, y) for x, y in points]

        lanes[f"{side}_in"] = Lane(f"{side}_in", Polyline(rot(base["in"])))
        lanes[f"{side}_out"] = Lane(f"{side}_out", Polyline(rot(base["out"])))
        for m in MANEUVERS:
            pts = base[m]
            if m == "right":
                pts = [(half, -BOX_HALF)] + pts[1:-1] + [(BOX_HALF, -half)]
            elif m == "left":
                pts = [(half, -BOX_HALF)] + pts[1:-1] + [(-BOX_HALF, half)]
            lanes[f"{side}_{m}"] = Lane(f"{side}_{m}", Polyline(rot(pts)), connector=True)
        for mx in (0.0, LANE_WIDTH, -LANE_WIDTH):
            markings.append(Polyline(rot([(mx, -far), (mx, -BOX_HALF)])))

    routes = {}
    for k, side in enumerate(APPROACHES):
        for m in MANEUVERS:
            dst = APPROACHES[(k + dest[m]) % 4]
            name = f"{side}_{m}"
            routes[name] = _build_route(name, side, m, [f"{side}_in", name, f"{dst}_out"], lanes)

    slots = [(f"{side}_in", ARM_LENGTH - d) for side in APPROACHES for d in SPAWN_DISTANCES]
    signals = [
        SignalSchedule("NS", 15.0, 3.0, 18.0, 0.0, ("S", "N")),
        SignalSchedule("EW", 15.0, 3.0, 18.0, 18.0, ("E", "W")),
    ]
    b = BOX_HALF
    box = ((-b, -b), (b, -b), (b, b), (-b, b))
    return RoadMap("fourway", lanes, box, markings, routes, slots, signals)


# ---------------------------------------------------------------- text format


def _fmt_points(points) -> str:
    return " ".join(f"{float(x)!r} {float(y)!r}" for x, y in points)


def format_map(m: RoadMap) -> str:
    out = [f"map {m.name}", f"box : {_fmt_points(m.box)}"]
    for lane in m.lanes.values():
        conn = " connector" if lane.connector else ""
        out.append(f"lane {lane.name} width {lane.width!r}{conn} : {_fmt_points(lane.polyline.points)}")
    for mk in m.markings:
        out.append(f"marking : {_fmt_points(mk.points)}")
    for r in m.routes.values():
        out.append(f"route {r.name} approach {r.approach} maneuver {r.maneuver} : {' '.join(r.lanes)}")
    for lane, s in m.spawn_slots:
        out.append(f"spawn {lane} {s!r}")
    for sig in m.signals:
        out.append(
            f"signal {sig.name} green {sig.green!r} amber {sig.amber!r} red {sig.red!r} "
            f"offset {sig.offset!r} approaches {' '.join(sig.approaches)}"
        )
    return "\n".join(out) + "\n"


class MapFormatError(ValueError):
    pass


def _parse_points(tokens, lineno):
    if len(tokens) % 2:
        raise MapFormatError(f"line {lineno}: odd number of coordinates")
    vals = [float(t) for t in tokens]
    return list(zip(vals[0::2], vals[1::2]))


def _kv(tokens, lineno) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        key = tokens[i]
        if key == "connector":
            out[key] = True
            i += 1
            continue
        if key == "approaches":
            out[key] = tuple(tokens[i + 1:])
            break
        if i + 1 >= len(tokens):
            raise MapFormatError(f"line {lineno}: missing value for {key!r}")
        out[key] = tokens[i + 1]
        i += 2
    return out


def parse_map(text: str) -> RoadMap:
    name = None
    box = None
    lanes: dict[str, Lane] = {}
    markings = []
    route_defs = []
    slots = []
    signals = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition(":")
        words = head.split()
        rest = tail.split()
        try:
            kind = words[0]
            if kind == "map":
                name = words[1]
            elif kind == "box":
                box = tuple(_parse_points(rest, lineno))
            elif kind == "lane":
                opts = _kv(words[2:], lineno)
                lanes[words[1]] = Lane(
                    words[1], Polyline(_parse_points(rest, lineno)), float(opts.get("width", LANE_WIDTH)),
                    bool(opts.get("connector", False)),
                )
            elif kind == "marking":
                markings.append(Polyline(_parse_points(rest, lineno)))
            elif kind == "route":
                opts = _kv(words[2:], lineno)
                route_defs.append((words[1], opts["approach"], opts["maneuver"], rest))
            elif kind == "spawn":
                slots.append((words[1], float(words[2])))
            elif kind == "signal":
                o = _kv(words[2:], lineno)
                signals.append(SignalSchedule(
                    words[1], float(o["green"]), float(o["amber"]), float(o["red"]), float(o.get("offset", 0.0)),
                    tuple(o["approaches"]),
                ))
            else:
                raise MapFormatError(f"line {lineno}: unknown record {kind!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, MapFormatError):
                raise
            raise MapFormatError(f"line {lineno}: malformed {words[0] if words else 'record'}: {exc}") from exc
    if name is None or box is None:
        raise MapFormatError("map needs 'map' and 'box' records")
    routes = {}
    for rname, approach, maneuver, lane_names in route_defs:
        missing = [ln for ln in lane_names if ln not in lanes]
        if missing:
            raise MapFormatError(f"route {rname} references unknown lanes {missing}")
        routes[rname] = _build_route(rname, approach, maneuver, lane_names, lanes)
    m = RoadMap(name, lanes, box, markings, routes, slots, signals)
    m.validate()
    return m


def load_map(path) -> RoadMap:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read())


def default_map() -> RoadMap:
    """The ``fourway.map`` shipped with the package."""
    text = resources.files("matsg.sim").joinpath("data/fourway.map").read_text(encoding="utf-8")
    return parse_map(text)
