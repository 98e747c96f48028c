"""Canonical path command types.

After normalization a document is a flat list of filled paths whose
geometry uses five command kinds: Move, Line, Cubic, Arc, Close.  The
canonical coordinate system is a fixed 200 by 200 viewBox anchored at the
origin; after quantization every coordinate is an integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parse import Rgb

CANONICAL_VIEW_BOX = (0.0, 0.0, 200.0, 200.0)
CANONICAL_SIZE = 200.0


@dataclass(frozen=True)
class Move:
    x: float
    y: float
    letter = "M"

    def args(self) -> tuple[float, ...]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Line:
    x: float
    y: float
    letter = "L"

    def args(self) -> tuple[float, ...]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Cubic:
    x1: float
    y1: float
    x2: float
    y2: float
    x: float
    y: float
    letter = "C"

    def args(self) -> tuple[float, ...]:
        return (self.x1, self.y1, self.x2, self.y2, self.x, self.y)


@dataclass(frozen=True)
class Arc:
    rx: float
    ry: float
    rotation: float  # x-axis rotation, degrees
    large_arc: int   # 0 or 1
    sweep: int       # 0 or 1
    x: float
    y: float
    letter = "A"

    def args(self) -> tuple[float, ...]:
        return (self.rx, self.ry, self.rotation, self.large_arc, self.sweep, self.x, self.y)


@dataclass(frozen=True)
class Close:
    letter = "Z"

    def args(self) -> tuple[float, ...]:
        return ()


PathCommand = Move | Line | Cubic | Arc | Close


@dataclass(frozen=True)
class CanonicalPath:
    fill: Rgb
    commands: tuple[PathCommand, ...]


@dataclass
class CanonicalDocument:
    paths: list[CanonicalPath] = field(default_factory=list)

    @property
    def view_box(self) -> tuple[float, float, float, float]:
        return CANONICAL_VIEW_BOX


def end_point(cmd: PathCommand, current: tuple[float, float],
              subpath_start: tuple[float, float]) -> tuple[float, float]:
    """Where the pen sits after executing cmd from current."""
    if isinstance(cmd, Close):
        return subpath_start
    return (cmd.x, cmd.y)
