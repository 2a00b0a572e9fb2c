"""Planar geometry helpers: oriented rectangles, SAT overlap, polylines."""

from __future__ import annotations

import math

import numpy as np

VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 2.0


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def rect_corners(x: float, y: float, heading: float, length: float = VEHICLE_LENGTH, width: float = VEHICLE_WIDTH):
    """Corners of an oriented rectangle, counter-clockwise."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2, width / 2
    return [
        (x + c * hl - s * hw, y + s * hl + c * hw),
        (x - c * hl - s * hw, y - s * hl + c * hw),
        (x - c * hl + s * hw, y - s * hl - c * hw),
        (x + c * hl + s * hw, y + s * hl - c * hw),
    ]


def _project(corners, ax: float, ay: float):
    lo = hi = corners[0][0] * ax + corners[0][1] * ay
    for px, py in corners[1:]:
        d = px * ax + py * ay
        if d < lo:
            lo = d
        elif d > hi:
            hi = d
    return lo, hi


def sat_overlap(a, b) -> bool:
    """Separating-axis test for two convex quadrilaterals given as corner lists.

    Touching boundaries count as overlap.
    """
    for poly in (a, b):
        for i in range(len(poly)):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % len(poly)]
            ax, ay = y1 - y0, x0 - x1
            lo_a, hi_a = _project(a, ax, ay)
            lo_b, hi_b = _project(b, ax, ay)
            if hi_a < lo_b or hi_b < lo_a:
                return False
    return True


def rects_collide(pose_a, pose_b, length: float = VEHICLE_LENGTH, width: float = VEHICLE_WIDTH) -> bool:
    """Collision test for two vehicle footprints given as ``(x, y, heading)``."""
    dx, dy = pose_a[0] - pose_b[0], pose_a[1] - pose_b[1]
    reach = length * length + width * width  # squared diagonal
    if dx * dx + dy * dy > reach:
        return False
    return sat_overlap(rect_corners(*pose_a, length, width), rect_corners(*pose_b, length, width))


def points_in_rect(px: np.ndarray, py: np.ndarray, x: float, y: float, heading: float,
                   length: float = VEHICLE_LENGTH, width: float = VEHICLE_WIDTH) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    dx, dy = px - x, py - y
    lon = dx * c + dy * s
    lat = -dx * s + dy * c
    return (np.abs(lon) <= length / 2) & (np.abs(lat) <= width / 2)


def point_in_convex(px, py, poly) -> np.ndarray:
    """Membership of points in a counter-clockwise convex polygon."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.ones(np.broadcast(px, py).shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        inside &= (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0) >= 0
    return inside


def segment_distance(px: np.ndarray, py: np.ndarray, a, b) -> np.ndarray:
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    if L2 == 0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + t * vx), py - (ay + t * vy))


class Polyline:
    """Piecewise-linear curve with arc-length parametrization."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two 2D points")
        seg = np.diff(pts, axis=0)
        seglen = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seglen <= 0):
            raise ValueError("polyline has repeated points")
        self.points = pts
        self.seg = seg
        self.seglen = seglen
        self.cum = np.concatenate([[0.0], np.cumsum(seglen)])
        self.length = float(self.cum[-1])
        self.headings = np.arctan2(seg[:, 1], seg[:, 0])
        # plain lists are faster than numpy for the per-tick scalar lookups
        self._pts = pts.tolist()
        self._seg = seg.tolist()
        self._seglen = seglen.tolist()
        self._cum = self.cum.tolist()
        self._head = self.headings.tolist()

    def _segment_index(self, s: float) -> int:
        cum = self._cum
        lo, hi = 0, len(cum) - 2
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if cum[mid] <= s:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def point_at(self, s: float):
        """``(x, y, heading)`` at arc length ``s`` (clamped, extrapolated past the end)."""
        s = max(s, 0.0)
        i = self._segment_index(min(s, self.length))
        t = (s - self._cum[i]) / self._seglen[i]
        (x0, y0), (dx, dy) = self._pts[i], self._seg[i]
        return x0 + t * dx, y0 + t * dy, self._head[i]

    def project(self, x: float, y: float, s_lo: float = 0.0, s_hi: float | None = None):
        """Closest point on the curve restricted to ``[s_lo, s_hi]``.

        Returns ``(s, lateral)`` with lateral offset positive to the left.
        """
        if s_hi is None:
            s_hi = self.length
        i0 = self._segment_index(max(0.0, min(s_lo, self.length)))
        i1 = self._segment_index(max(0.0, min(s_hi, self.length)))
        best = (math.inf, 0.0, 0.0)
        for i in range(i0, i1 + 1):
            (x0, y0), (dx, dy), L = self._pts[i], self._seg[i], self._seglen[i]
            t = ((x - x0) * dx + (y - y0) * dy) / (L * L)
            lo_t = (s_lo - self._cum[i]) / L if i == i0 else 0.0
            hi_t = (s_hi - self._cum[i]) / L if i == i1 else 1.0
            t = min(max(t, max(lo_t, 0.0)), min(hi_t, 1.0))
            cx, cy = x0 + t * dx, y0 + t * dy
            ex, ey = x - cx, y - cy
            d2 = ex * ex + ey * ey
            if d2 < best[0]:
                lat = (dx * ey - dy * ex) / L
                best = (d2, self._cum[i] + t * L, lat)
        return best[1], best[2]

    def curvature_speed_profile(self, a_lat: float, v_max: float, step: float = 0.5) -> np.ndarray:
        """Speed limit sampled every ``step`` metres from lateral acceleration."""
        n = int(self.length / step) + 1
        limits = np.full(n, v_max)
        for i in range(1, len(self.headings)):
            dh = abs(wrap_angle(self.headings[i] - self.headings[i - 1]))
            if dh < 1e-9:
                continue
            ds = 0.5 * (self.seglen[i] + self.seglen[i - 1])
            radius = ds / dh
            v = math.sqrt(a_lat * radius)
            k = int(self.cum[i] / step)
            lo, hi = max(0, k - int(ds / step) - 1), min(n, k + int(ds / step) + 2)
            limits[lo:hi] = np.minimum(limits[lo:hi], v)
        return limits
