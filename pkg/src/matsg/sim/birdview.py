"""Ego-centric occupancy-grid observations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import VEHICLE_LENGTH, VEHICLE_WIDTH, points_in_rect
from .roadmap import RoadMap

GRID = 64
CELL = 0.5
EGO_ROW = GRID // 2
EGO_COL = GRID // 4
CHANNELS = ("drivable", "lane_markings", "vehicles", "route")
MARKING_HALF_WIDTH = CELL / 2
ROUTE_SAMPLE = 0.25
STATIC_RES = 0.05  # resolution (m) of the pre-rendered world layers

# cell centres in the ego frame: +x forward (columns), +y left (rows)
_cols = (np.arange(GRID) - EGO_COL + 0.5) * CELL
_rows = (np.arange(GRID) - EGO_ROW + 0.5) * CELL
GX, GY = np.meshgrid(_cols, _rows)


@dataclass
class BirdviewObservation:
    grid: np.ndarray  # uint8, (4, 64, 64)
    ego: np.ndarray  # float64: speed, v_target, remaining route length

    def flat(self) -> np.ndarray:
        return np.concatenate([self.grid.reshape(-1).astype(np.float64), self.ego])


class MapRaster:
    """Static road geometry prepared for fast per-cell membership tests."""

    def __init__(self, roadmap: RoadMap):
        rects = []
        box = roadmap.box
        for lane in roadmap.lanes.values():
            pl = lane.polyline
            for (x0, y0), (x1, y1), L in zip(pl.points[:-1], pl.points[1:], pl.seglen):
                if _inside_convex((x0, y0), box) and _inside_convex((x1, y1), box):
                    continue
                rects.append(((x0 + x1) / 2, (y0 + y1) / 2, math.atan2(y1 - y0, x1 - x0), L, lane.width))
        self.rects = np.array(rects, dtype=float).reshape(-1, 5)
        segs = []
        for mk in roadmap.markings:
            for a, b in zip(mk.points[:-1], mk.points[1:]):
                segs.append((*a, *b))
        self.marking_segments = np.array(segs, dtype=float).reshape(-1, 4)
        self.box = np.array(box, dtype=float)
        self._render_static()
        self.route_points = {}
        for name, r in roadmap.routes.items():
            n = int(r.length / ROUTE_SAMPLE) + 1
            s = np.minimum(np.arange(n + 1) * ROUTE_SAMPLE, r.length)
            self.route_points[name] = np.array([r.polyline.point_at(x)[:2] for x in s])


    def _render_static(self) -> None:
        """Pre-render drivable area and markings on a fine world-frame grid.

        Each primitive is evaluated only on the grid window covering its
        bounding box, so building the layers is cheap; observations then
        sample them by nearest lookup.
        """
        pts = [self.box]
        if len(self.rects):
            r = np.hypot(self.rects[:, 3], self.rects[:, 4]) / 2
            pts.append(np.stack([self.rects[:, 0] - r, self.rects[:, 1] - r], 1))
            pts.append(np.stack([self.rects[:, 0] + r, self.rects[:, 1] + r], 1))
        if len(self.marking_segments):
            pts.append(self.marking_segments[:, :2])
            pts.append(self.marking_segments[:, 2:])
        allp = np.concatenate(pts)
        # samples sit half a step off the multiples of STATIC_RES, so no sample lies on a
        # map edge and the layers keep the map's symmetries exactly
        self.origin = (np.floor((allp.min(axis=0) - 1.0) / STATIC_RES) + 0.5) * STATIC_RES
        shape = np.ceil((allp.max(axis=0) + 1.0 - self.origin) / STATIC_RES).astype(int) + 1
        self.static = np.zeros((2, shape[1], shape[0]), dtype=np.uint8)  # [layer, iy, ix]

        def window(xmin, ymin, xmax, ymax):
            i0 = max(int((xmin - self.origin[0]) / STATIC_RES), 0)
            i1 = min(int((xmax - self.origin[0]) / STATIC_RES) + 2, shape[0])
            j0 = max(int((ymin - self.origin[1]) / STATIC_RES), 0)
            j1 = min(int((ymax - self.origin[1]) / STATIC_RES) + 2, shape[1])
            gx = self.origin[0] + np.arange(i0, i1) * STATIC_RES
            gy = self.origin[1] + np.arange(j0, j1) * STATIC_RES
            X, Y = np.meshgrid(gx, gy)
            return (slice(j0, j1), slice(i0, i1)), X, Y

        bx, by = self.box[:, 0], self.box[:, 1]
        sl, X, Y = window(bx.min(), by.min(), bx.max(), by.max())
        self.static[0][sl] |= _box_mask(X, Y, self.box)
        for rx, ry, rh, L, W in self.rects:
            r = math.hypot(L, W) / 2
            sl, X, Y = window(rx - r, ry - r, rx + r, ry + r)
            self.static[0][sl] |= points_in_rect(X, Y, rx, ry, rh, L, W)
        hw = MARKING_HALF_WIDTH
        for ax, ay, bx_, by_ in self.marking_segments:
            sl, X, Y = window(min(ax, bx_) - hw, min(ay, by_) - hw, max(ax, bx_) + hw, max(ay, by_) + hw)
            self.static[1][sl] |= _segment_band(X, Y, ax, ay, bx_, by_, hw)

    def sample_static(self, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
        """Nearest-sample both static layers at world points; zero off the map."""
        ix = np.rint((wx - self.origin[0]) / STATIC_RES).astype(np.intp)
        iy = np.rint((wy - self.origin[1]) / STATIC_RES).astype(np.intp)
        h, w = self.static.shape[1:]
        ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        out = np.zeros((2,) + wx.shape, dtype=np.uint8)
        out[:, ok] = self.static[:, iy[ok], ix[ok]]
        return out


def _inside_convex(p, poly) -> bool:
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0) < 0:
            return False
    return True


def world_to_ego(x, y, ego_x, ego_y, ego_h):
    c, s = math.cos(ego_h), math.sin(ego_h)
    dx, dy = np.asarray(x) - ego_x, np.asarray(y) - ego_y
    return dx * c + dy * s, -dx * s + dy * c


def rasterize_birdview(world, agent: int, raster: MapRaster | None = None) -> BirdviewObservation:
    """Occupancy grid around ``agent``, ego at cell (32, 16) facing +columns."""
    raster = raster or MapRaster(world.roadmap)
    ego = world.vehicles[agent].state
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    wx = ego.x + GX * c - GY * s
    wy = ego.y + GX * s + GY * c
    grid = np.zeros((4, GRID, GRID), dtype=np.uint8)

    grid[:2] = raster.sample_static(wx, wy)

    for veh in world.vehicles:
        if not veh.present:
            continue
        _draw_vehicle(grid[2], veh.state, ego)

    pts = raster.route_points[ego.route]
    start = min(int(ego.p / ROUTE_SAMPLE), len(pts) - 1)
    ex, ey = world_to_ego(pts[start:, 0], pts[start:, 1], ego.x, ego.y, ego.heading)
    cols = np.floor(ex / CELL).astype(int) + EGO_COL
    rows = np.floor(ey / CELL).astype(int) + EGO_ROW
    ok = (cols >= 0) & (cols < GRID) & (rows >= 0) & (rows < GRID)
    grid[3, rows[ok], cols[ok]] = 1

    remaining = world.route(ego.route).length - ego.p
    return BirdviewObservation(grid, np.array([ego.speed, world.v_target, remaining]))


def _box_mask(wx, wy, box) -> np.ndarray:
    inside = np.ones(wx.shape, dtype=bool)
    n = len(box)
    for i in range(n):
        x0, y0 = box[i]
        x1, y1 = box[(i + 1) % n]
        inside &= (x1 - x0) * (wy - y0) - (y1 - y0) * (wx - x0) >= 0
    return inside


def _segment_band(px, py, ax, ay, bx, by, half_width) -> np.ndarray:
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / L2, 0.0, 1.0)
    dx, dy = px - (ax + t * vx), py - (ay + t * vy)
    return dx * dx + dy * dy <= half_width * half_width


def _draw_vehicle(channel: np.ndarray, v, ego) -> None:
    ex, ey = world_to_ego(v.x, v.y, ego.x, ego.y, ego.heading)
    col = int(math.floor(float(ex) / CELL)) + EGO_COL
    row = int(math.floor(float(ey) / CELL)) + EGO_ROW
    pad = int(math.ceil(math.hypot(VEHICLE_LENGTH, VEHICLE_WIDTH) / 2 / CELL)) + 1
    r0, r1 = max(row - pad, 0), min(row + pad + 1, GRID)
    c0, c1 = max(col - pad, 0), min(col + pad + 1, GRID)
    if r0 >= r1 or c0 >= c1:
        return
    sub = points_in_rect(
        GX[r0:r1, c0:c1], GY[r0:r1, c0:c1], float(ex), float(ey), v.heading - ego.heading,
    )
    channel[r0:r1, c0:c1] |= sub.astype(np.uint8)
