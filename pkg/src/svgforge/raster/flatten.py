"""Flatten canonical path commands into polygonal rings.

Cubics are subdivided adaptively (de Casteljau) until every control
point sits within tolerance of the chord; arcs are sampled at an angular
step chosen so the sagitta stays within tolerance.  Each subpath yields
one ring; unclosed subpaths are closed implicitly for filling, which is
exactly how fill semantics treat them.
"""

from __future__ import annotations

import math

from ..model import Arc, Close, Cubic, Line, Move, PathCommand
from . import arcs as arcmath

DEFAULT_TOLERANCE = 0.1
_MAX_DEPTH = 32

Point = tuple[float, float]


def flatten_commands(commands, tolerance: float = DEFAULT_TOLERANCE) -> list[list[Point]]:
    """Flatten a command sequence into rings of points.

    Rings with fewer than three points cannot enclose area and are
    dropped.  Consecutive duplicate points are collapsed.
    """
    rings: list[list[Point]] = []
    ring: list[Point] = []
    cx = cy = 0.0
    sx = sy = 0.0

    def close_ring():
        nonlocal ring
        if len(ring) >= 3:
            rings.append(ring)
        ring = []

    for cmd in commands:
        if isinstance(cmd, Move):
            close_ring()
            cx, cy = cmd.x, cmd.y
            sx, sy = cmd.x, cmd.y
            ring = [(cx, cy)]
        elif isinstance(cmd, Line):
            _emit(ring, (cmd.x, cmd.y))
            cx, cy = cmd.x, cmd.y
        elif isinstance(cmd, Cubic):
            _flatten_cubic(
                ring,
                (cx, cy), (cmd.x1, cmd.y1), (cmd.x2, cmd.y2), (cmd.x, cmd.y),
                tolerance, 0,
            )
            cx, cy = cmd.x, cmd.y
        elif isinstance(cmd, Arc):
            carc = arcmath.arc_endpoint_to_center(cx, cy, cmd)
            if carc is None:
                _emit(ring, (cmd.x, cmd.y))
            else:
                _sample_arc(ring, carc, tolerance)
                # Land exactly on the stated endpoint regardless of
                # trigonometric rounding.
                if ring:
                    ring[-1] = (cmd.x, cmd.y)
            cx, cy = cmd.x, cmd.y
        elif isinstance(cmd, Close):
            cx, cy = sx, sy
            close_ring()
        else:
            raise TypeError(f"cannot flatten {cmd!r}")
    close_ring()
    return rings


def _emit(ring: list[Point], pt: Point):
    if not ring or ring[-1] != pt:
        ring.append(pt)


def _flatten_cubic(ring, p0: Point, p1: Point, p2: Point, p3: Point,
                   tol: float, depth: int):
    if depth >= _MAX_DEPTH or _cubic_flat_enough(p0, p1, p2, p3, tol):
        _emit(ring, p3)
        return
    # de Casteljau split at t = 1/2
    m01 = _mid(p0, p1)
    m12 = _mid(p1, p2)
    m23 = _mid(p2, p3)
    m012 = _mid(m01, m12)
    m123 = _mid(m12, m23)
    mid = _mid(m012, m123)
    _flatten_cubic(ring, p0, m01, m012, mid, tol, depth + 1)
    _flatten_cubic(ring, mid, m123, m23, p3, tol, depth + 1)


def _mid(a: Point, b: Point) -> Point:
    return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)


def _cubic_flat_enough(p0: Point, p1: Point, p2: Point, p3: Point, tol: float) -> bool:
    # Control points within tol of the chord bound the curve within tol.
    return (
        _point_segment_dist(p1, p0, p3) <= tol
        and _point_segment_dist(p2, p0, p3) <= tol
    )


def _point_segment_dist(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx = bx - ax
    dy = by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg_sq
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _sample_arc(ring, carc: arcmath.CenterArc, tol: float):
    r = max(carc.rx, carc.ry)
    if r <= tol:
        max_step = 90.0
    else:
        # Sagitta of a chord spanning angle a is r * (1 - cos(a / 2)).
        ratio = max(-1.0, 1.0 - tol / r)
        max_step = math.degrees(2.0 * math.acos(ratio))
        max_step = min(90.0, max(0.5, max_step))
    n = max(1, int(math.ceil(abs(carc.delta_deg) / max_step)))
    step = carc.delta_deg / n
    for i in range(1, n + 1):
        _emit(ring, carc.point_at(carc.theta1_deg + i * step))
