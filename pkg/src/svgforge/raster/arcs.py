"""Elliptical arc conversions.

Endpoint parameterization (what path data carries) to center
parameterization (what you can actually evaluate), plus approximation of
a center arc by cubic Bezier segments.

The endpoint form underdetermines the ellipse when the radii are too
small to span the endpoints; in that case both radii are scaled up by the
smallest factor that makes the geometry solvable, which is the square
root of the mismatch ratio.  Out-of-range inputs are repaired rather than
rejected: radius signs are dropped and zero radii degrade to a straight
line, matching how renderers treat such paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..model import Arc


@dataclass(frozen=True)
class CenterArc:
    cx: float
    cy: float
    rx: float
    ry: float
    phi_deg: float     # ellipse x-axis rotation
    theta1_deg: float  # start angle on the ellipse
    delta_deg: float   # signed sweep; positive follows increasing angle

    def point_at(self, theta_deg: float) -> tuple[float, float]:
        """Evaluate the ellipse at parametric angle theta (degrees)."""
        phi = math.radians(self.phi_deg)
        theta = math.radians(theta_deg)
        cos_phi = math.cos(phi)
        sin_phi = math.sin(phi)
        ux = self.rx * math.cos(theta)
        uy = self.ry * math.sin(theta)
        return (
            self.cx + cos_phi * ux - sin_phi * uy,
            self.cy + sin_phi * ux + cos_phi * uy,
        )

    def derivative_at(self, theta_deg: float) -> tuple[float, float]:
        phi = math.radians(self.phi_deg)
        theta = math.radians(theta_deg)
        cos_phi = math.cos(phi)
        sin_phi = math.sin(phi)
        dx = -self.rx * math.sin(theta)
        dy = self.ry * math.cos(theta)
        return (cos_phi * dx - sin_phi * dy, sin_phi * dx + cos_phi * dy)

    def end_angles(self) -> tuple[float, float]:
        return (self.theta1_deg, self.theta1_deg + self.delta_deg)


def arc_endpoint_to_center(x0: float, y0: float, arc: Arc) -> CenterArc | None:
    """Convert an endpoint-form arc starting at (x0, y0) to center form.

    Returns None when the arc degenerates to a straight line: zero radius
    after repair, or start and end points that coincide.  Callers should
    replace a degenerate arc with a line to the arc's endpoint.
    """
    x1, y1 = arc.x, arc.y
    rx = abs(arc.rx)
    ry = abs(arc.ry)
    if rx == 0.0 or ry == 0.0:
        return None
    if x0 == x1 and y0 == y1:
        return None

    phi = math.radians(arc.rotation)
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)

    # Step 1: midpoint frame aligned with the ellipse axes.
    dx2 = (x0 - x1) / 2.0
    dy2 = (y0 - y1) / 2.0
    x1p = cos_phi * dx2 + sin_phi * dy2
    y1p = -sin_phi * dx2 + cos_phi * dy2

    # Step 2: scale radii up if they cannot reach both endpoints.
    lam = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry)
    if lam > 1.0:
        scale = math.sqrt(lam)
        rx *= scale
        ry *= scale

    # Step 3: center in the midpoint frame.  The radicand is clamped at
    # zero; radius correction above guarantees it is only negative by
    # rounding error.
    rx_sq = rx * rx
    ry_sq = ry * ry
    num = rx_sq * ry_sq - rx_sq * y1p * y1p - ry_sq * x1p * x1p
    den = rx_sq * y1p * y1p + ry_sq * x1p * x1p
    radicand = max(0.0, num / den)
    coef = math.sqrt(radicand)
    if arc.large_arc == arc.sweep:
        coef = -coef
    cxp = coef * (rx * y1p / ry)
    cyp = coef * (-(ry * x1p) / rx)

    # Step 4: back to user space.
    cx = cos_phi * cxp - sin_phi * cyp + (x0 + x1) / 2.0
    cy = sin_phi * cxp + cos_phi * cyp + (y0 + y1) / 2.0

    theta1 = _vector_angle(1.0, 0.0, (x1p - cxp) / rx, (y1p - cyp) / ry)
    delta = _vector_angle(
        (x1p - cxp) / rx, (y1p - cyp) / ry,
        (-x1p - cxp) / rx, (-y1p - cyp) / ry,
    ) % 360.0
    if arc.sweep == 0 and delta > 0.0:
        delta -= 360.0

    return CenterArc(cx, cy, rx, ry, arc.rotation, theta1, delta)


def arc_center_to_endpoint(carc: CenterArc) -> tuple[tuple[float, float], Arc]:
    """Inverse of arc_endpoint_to_center: recover start point and command."""
    start = carc.point_at(carc.theta1_deg)
    end = carc.point_at(carc.theta1_deg + carc.delta_deg)
    large_arc = 1 if abs(carc.delta_deg) > 180.0 else 0
    sweep = 1 if carc.delta_deg > 0.0 else 0
    return start, Arc(carc.rx, carc.ry, carc.phi_deg, large_arc, sweep, end[0], end[1])


def arc_to_cubics(carc: CenterArc, max_sweep_deg: float = 90.0
                  ) -> list[tuple[float, float, float, float, float, float]]:
    """Approximate a center arc by cubic segments of at most max_sweep_deg.

    Returns (x1, y1, x2, y2, x, y) control tuples; the start point is the
    arc's start point.  Uses the standard tangent-length coefficient
    alpha = sin(d) * (sqrt(4 + 3 * tan(d/2)^2) - 1) / 3 for sweep d.
    """
    n = max(1, int(math.ceil(abs(carc.delta_deg) / max_sweep_deg)))
    step = carc.delta_deg / n
    segments = []
    theta = carc.theta1_deg
    for _ in range(n):
        theta_next = theta + step
        d = math.radians(step)
        t_half = math.tan(d / 2.0)
        alpha = math.sin(d) * (math.sqrt(4.0 + 3.0 * t_half * t_half) - 1.0) / 3.0
        p0 = carc.point_at(theta)
        p1 = carc.point_at(theta_next)
        d0 = carc.derivative_at(theta)
        d1 = carc.derivative_at(theta_next)
        # Derivatives are per radian; alpha already carries the step size.
        segments.append((
            p0[0] + alpha * d0[0], p0[1] + alpha * d0[1],
            p1[0] - alpha * d1[0], p1[1] - alpha * d1[1],
            p1[0], p1[1],
        ))
        theta = theta_next
    return segments


def _vector_angle(ux: float, uy: float, vx: float, vy: float) -> float:
    """Signed angle from vector u to vector v, in degrees.

    atan2 of (cross, dot) stays well conditioned for nearly colinear
    vectors, where the acos form loses half the significant digits.
    """
    cross = ux * vy - uy * vx
    dot = ux * vx + uy * vy
    if cross == 0.0 and dot == 0.0:
        return 0.0
    return math.degrees(math.atan2(cross, dot))
