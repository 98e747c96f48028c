"""Affine transform helpers.

Matrices use the SVG six-value convention ``(a, b, c, d, e, f)``::

    | a  c  e |
    | b  d  f |
    | 0  0  1 |

applied to column vectors, so a point maps as
``x' = a*x + c*y + e`` and ``y' = b*x + d*y + f``.
"""

from __future__ import annotations

import math

Affine = tuple[float, float, float, float, float, float]

IDENTITY: Affine = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def multiply(m1: Affine, m2: Affine) -> Affine:
    """Compose two transforms: the result applies m2 first, then m1."""
    a1, b1, c1, d1, e1, f1 = m1
    a2, b2, c2, d2, e2, f2 = m2
    return (
        a1 * a2 + c1 * b2,
        b1 * a2 + d1 * b2,
        a1 * c2 + c1 * d2,
        b1 * c2 + d1 * d2,
        a1 * e2 + c1 * f2 + e1,
        b1 * e2 + d1 * f2 + f1,
    )


def apply(m: Affine, x: float, y: float) -> tuple[float, float]:
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


def apply_vector(m: Affine, x: float, y: float) -> tuple[float, float]:
    """Apply only the linear part (no translation); for direction vectors."""
    a, b, c, d, _, _ = m
    return (a * x + c * y, b * x + d * y)


def translation(tx: float, ty: float = 0.0) -> Affine:
    return (1.0, 0.0, 0.0, 1.0, tx, ty)


def scaling(sx: float, sy: float | None = None) -> Affine:
    if sy is None:
        sy = sx
    return (sx, 0.0, 0.0, sy, 0.0, 0.0)


def rotation_deg(angle: float, cx: float = 0.0, cy: float = 0.0) -> Affine:
    rad = math.radians(angle)
    cos_a = math.cos(rad)
    sin_a = math.sin(rad)
    rot: Affine = (cos_a, sin_a, -sin_a, cos_a, 0.0, 0.0)
    if cx == 0.0 and cy == 0.0:
        return rot
    return multiply(multiply(translation(cx, cy), rot), translation(-cx, -cy))


def skew_x_deg(angle: float) -> Affine:
    return (1.0, 0.0, math.tan(math.radians(angle)), 1.0, 0.0, 0.0)


def skew_y_deg(angle: float) -> Affine:
    return (1.0, math.tan(math.radians(angle)), 0.0, 1.0, 0.0, 0.0)


def is_identity(m: Affine) -> bool:
    return m == IDENTITY


def is_axis_aligned_scale(m: Affine) -> bool:
    """True when the linear part is diagonal with positive entries.

    Such transforms map axis-aligned ellipses to axis-aligned ellipses,
    which lets elliptical arcs survive by scaling their radii.
    """
    a, b, c, d, _, _ = m
    return b == 0.0 and c == 0.0 and a > 0.0 and d > 0.0


def is_uniform_scale(m: Affine) -> bool:
    """True when the linear part is a positive uniform scale (no rotation)."""
    a, b, c, d, _, _ = m
    return b == 0.0 and c == 0.0 and a > 0.0 and a == d
