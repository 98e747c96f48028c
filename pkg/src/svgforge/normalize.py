"""Normalization pipeline: arbitrary lenient-subset SVG to canonical form.

Canonical form is a flat list of solid-filled paths in a fixed
``0 0 200 200`` viewBox, using only the M, L, C, A, Z commands with
absolute integer coordinates, serialized byte-stably.  The pipeline:

    parse -> shapes_to_paths -> flatten_tree -> absolutize
          -> restrict_vocabulary -> rescale_viewbox -> quantize
          -> filter_sample -> serialize_canonical

Samples that cannot be represented honestly (unsupported paint or
elements, nothing visible, over the token budget) are rejected with a
reason rather than silently mangled.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
from dataclasses import dataclass

from . import geom, parse
from .model import (
    CANONICAL_SIZE,
    Arc,
    CanonicalDocument,
    CanonicalPath,
    Close,
    Cubic,
    Line,
    Move,
    PathCommand,
)
from .parse import (
    GroupElement,
    NoneFill,
    Paint,
    ParseError,
    PathElement,
    RawCommand,
    RawDocument,
    Rgb,
    ShapeElement,
    Unsupported,
)
from .raster import arcs as arcmath

logger = logging.getLogger(__name__)

TOKEN_LIMIT = 8000
TOKEN_DIVISOR = 3

REJECT_KINDS = (
    "empty",
    "monochrome",
    "too-long",
    "non-renderable",
    "unsupported-paint",
    "unsupported-element",
)


@dataclass(frozen=True)
class RejectReason:
    kind: str
    detail: str = ""

    def __post_init__(self):
        if self.kind not in REJECT_KINDS:
            raise ValueError(f"unknown reject kind {self.kind!r}")


class RejectError(Exception):
    """Internal control flow: a stage decided the sample must be rejected."""

    def __init__(self, reason: RejectReason):
        super().__init__(f"{reason.kind}: {reason.detail}")
        self.reason = reason


@dataclass(frozen=True)
class SampleStats:
    paths: int
    commands: int
    command_histogram: dict[str, int]
    colors: int
    token_estimate: int


@dataclass(frozen=True)
class Normalized:
    text: str
    stats: SampleStats


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason


@dataclass(frozen=True)
class NormalizeConfig:
    token_limit: int = TOKEN_LIMIT
    token_divisor: int = TOKEN_DIVISOR
    tokenizer_cmd: str | None = None
    render_check_size: int = 200


# ---------------------------------------------------------------------------
# stage: shapes to paths


def shapes_to_paths(doc: RawDocument) -> RawDocument:
    """Replace basic shapes with equivalent path elements.

    Rounded rectangles, circles, and ellipses become arc commands.  Lines
    are stroke-only and paint nothing when filled, so they are dropped
    and counted; zero-sized shapes are dropped with a warning; negative
    sizes poison the sample.
    """
    out = RawDocument(
        view_box=doc.view_box,
        width=doc.width,
        height=doc.height,
        warnings=list(doc.warnings),
        unsupported=list(doc.unsupported),
        dropped_invisible=doc.dropped_invisible,
    )
    out.elements = _convert_shapes(doc.elements, out)
    return out


def _convert_shapes(elements, out: RawDocument):
    converted = []
    for element in elements:
        if isinstance(element, GroupElement):
            group = GroupElement(transform=element.transform, fill=element.fill)
            group.children = _convert_shapes(element.children, out)
            converted.append(group)
        elif isinstance(element, ShapeElement):
            replacement = _shape_to_path(element, out)
            if replacement is not None:
                converted.append(replacement)
        else:
            converted.append(element)
    return converted


def _shape_to_path(shape: ShapeElement, out: RawDocument) -> PathElement | None:
    p = shape.params
    if shape.kind == "line":
        out.warnings.append("dropped stroke-only <line>")
        out.dropped_invisible += 1
        return None

    if shape.kind == "rect":
        x = p.get("x", 0.0)
        y = p.get("y", 0.0)
        w = p.get("width", 0.0)
        h = p.get("height", 0.0)
        if w < 0 or h < 0:
            raise RejectError(RejectReason("non-renderable", "rect with negative size"))
        if w == 0 or h == 0:
            out.warnings.append("dropped zero-size <rect>")
            return None
        rx = p.get("rx")
        ry = p.get("ry")
        if rx is None and ry is not None:
            rx = ry
        if ry is None and rx is not None:
            ry = rx
        rx = 0.0 if rx is None else rx
        ry = 0.0 if ry is None else ry
        if rx < 0 or ry < 0:
            raise RejectError(RejectReason("non-renderable", "rect with negative corner radius"))
        rx = min(rx, w / 2.0)
        ry = min(ry, h / 2.0)
        if rx == 0.0 or ry == 0.0:
            cmds = [
                RawCommand("M", (x, y)),
                RawCommand("L", (x + w, y)),
                RawCommand("L", (x + w, y + h)),
                RawCommand("L", (x, y + h)),
                RawCommand("Z", ()),
            ]
        else:
            a = (rx, ry, 0.0, 0.0, 1.0)
            cmds = [
                RawCommand("M", (x + rx, y)),
                RawCommand("L", (x + w - rx, y)),
                RawCommand("A", a + (x + w, y + ry)),
                RawCommand("L", (x + w, y + h - ry)),
                RawCommand("A", a + (x + w - rx, y + h)),
                RawCommand("L", (x + rx, y + h)),
                RawCommand("A", a + (x, y + h - ry)),
                RawCommand("L", (x, y + ry)),
                RawCommand("A", a + (x + rx, y)),
                RawCommand("Z", ()),
            ]
        return PathElement(commands=cmds, fill=shape.fill)

    if shape.kind in ("circle", "ellipse"):
        cx = p.get("cx", 0.0)
        cy = p.get("cy", 0.0)
        if shape.kind == "circle":
            rx = ry = p.get("r", 0.0)
        else:
            rx = p.get("rx", 0.0)
            ry = p.get("ry", 0.0)
        if rx < 0 or ry < 0:
            raise RejectError(RejectReason("non-renderable", f"{shape.kind} with negative radius"))
        if rx == 0 or ry == 0:
            out.warnings.append(f"dropped zero-radius <{shape.kind}>")
            return None
        # Two half turns; a single arc with coincident endpoints draws nothing.
        cmds = [
            RawCommand("M", (cx + rx, cy)),
            RawCommand("A", (rx, ry, 0.0, 1.0, 1.0, cx - rx, cy)),
            RawCommand("A", (rx, ry, 0.0, 1.0, 1.0, cx + rx, cy)),
            RawCommand("Z", ()),
        ]
        return PathElement(commands=cmds, fill=shape.fill)

    if shape.kind in ("polygon", "polyline"):
        if not shape.points:
            out.warnings.append(f"dropped empty <{shape.kind}>")
            return None
        cmds = [RawCommand("M", shape.points[0])]
        cmds.extend(RawCommand("L", pt) for pt in shape.points[1:])
        if shape.kind == "polygon":
            cmds.append(RawCommand("Z", ()))
        return PathElement(commands=cmds, fill=shape.fill)

    raise RejectError(RejectReason("unsupported-element", shape.kind))


# ---------------------------------------------------------------------------
# stage: flatten the tree


def flatten_tree(doc: RawDocument) -> list[tuple[Rgb, list[RawCommand]]]:
    """Resolve groups, transforms, and fill inheritance to a flat list.

    Output commands are absolute; transforms are baked into coordinates.
    Arcs survive axis-preserving positive scales (radii scaled); any
    other transform converts them to cubics first.
    """
    if doc.unsupported:
        raise RejectError(RejectReason("unsupported-element", doc.unsupported[0]))

    result: list[tuple[Rgb, list[RawCommand]]] = []
    dropped = doc.dropped_invisible

    def visit(elements, matrix: geom.Affine, inherited: Paint | None):
        nonlocal dropped
        for element in elements:
            if isinstance(element, GroupElement):
                fill = element.fill if element.fill is not None else inherited
                visit(element.children, geom.multiply(matrix, element.transform), fill)
                continue
            if isinstance(element, ShapeElement):
                # Normally shape conversion has already run; handle a
                # standalone call by converting on the fly.
                scratch = RawDocument(view_box=doc.view_box)
                converted = _shape_to_path(element, scratch)
                dropped += scratch.dropped_invisible
                if converted is None:
                    continue
                element = converted
            fill = element.fill if element.fill is not None else inherited
            if fill is None:
                fill = parse.BLACK
            if isinstance(fill, NoneFill):
                dropped += 1
                continue
            if isinstance(fill, Unsupported):
                raise RejectError(RejectReason("unsupported-paint", fill.kind))
            commands = _transform_commands(absolutize(element.commands), matrix)
            if commands:
                result.append((fill, commands))

    visit(doc.elements, geom.IDENTITY, None)
    if not result and dropped > 0:
        raise RejectError(
            RejectReason("unsupported-element", "only stroke-only or invisible geometry")
        )
    return result


def _transform_commands(commands: list[RawCommand], m: geom.Affine) -> list[RawCommand]:
    if geom.is_identity(m):
        return commands

    arc_ok = geom.is_axis_aligned_scale(m)
    uniform = geom.is_uniform_scale(m)
    out: list[RawCommand] = []
    cx = cy = 0.0  # current point in pre-transform space
    sx = sy = 0.0

    for cmd in commands:
        letter = cmd.letter
        a = cmd.args
        if letter == "M":
            cx, cy = a
            sx, sy = a
            out.append(RawCommand("M", geom.apply(m, cx, cy)))
        elif letter == "L":
            cx, cy = a
            out.append(RawCommand("L", geom.apply(m, cx, cy)))
        elif letter == "H":
            cx = a[0]
            out.append(RawCommand("L", geom.apply(m, cx, cy)))
        elif letter == "V":
            cy = a[0]
            out.append(RawCommand("L", geom.apply(m, cx, cy)))
        elif letter in ("C", "S", "Q", "T"):
            points = [(a[i], a[i + 1]) for i in range(0, len(a), 2)]
            mapped: list[float] = []
            for px, py in points:
                mapped.extend(geom.apply(m, px, py))
            out.append(RawCommand(letter, tuple(mapped)))
            cx, cy = points[-1]
        elif letter == "A":
            rx, ry, rot, laf, sf, ex, ey = a
            if arc_ok and (uniform or rot % 180.0 == 0.0):
                # Axis-aligned positive scale keeps the ellipse axis-aligned;
                # for a uniform scale m[0] == m[3] so both radii scale alike.
                nex, ney = geom.apply(m, ex, ey)
                out.append(RawCommand(
                    "A", (abs(rx) * m[0], abs(ry) * m[3], rot, laf, sf, nex, ney)
                ))
            else:
                carc = arcmath.arc_endpoint_to_center(
                    cx, cy, Arc(rx, ry, rot, int(laf), int(sf), ex, ey)
                )
                if carc is None:
                    out.append(RawCommand("L", geom.apply(m, ex, ey)))
                else:
                    for seg in arcmath.arc_to_cubics(carc):
                        x1, y1, x2, y2, px, py = seg
                        out.append(RawCommand("C", (
                            *geom.apply(m, x1, y1),
                            *geom.apply(m, x2, y2),
                            *geom.apply(m, px, py),
                        )))
            cx, cy = ex, ey
        elif letter == "Z":
            out.append(cmd)
            cx, cy = sx, sy
        else:
            raise ValueError(f"unexpected letter {letter!r} after absolutize")
    return out


# ---------------------------------------------------------------------------
# stage: absolutize


def absolutize(commands: list[RawCommand]) -> list[RawCommand]:
    """Convert every command to its absolute uppercase form.

    Shorthand letters (H, V, S, T) survive; only relativity is removed.
    An initial relative moveto is absolute by definition.
    """
    if not commands:
        return []
    if commands[0].letter.upper() != "M":
        raise RejectError(
            RejectReason("non-renderable", "path data does not start with a moveto")
        )

    out: list[RawCommand] = []
    cx = cy = 0.0
    sx = sy = 0.0
    for cmd in commands:
        letter = cmd.letter
        a = cmd.args
        upper = letter.upper()
        relative = letter.islower()

        if upper == "M":
            x, y = a
            if relative:
                x += cx
                y += cy
            out.append(RawCommand("M", (x, y)))
            cx, cy, sx, sy = x, y, x, y
        elif upper == "L":
            x, y = a
            if relative:
                x += cx
                y += cy
            out.append(RawCommand("L", (x, y)))
            cx, cy = x, y
        elif upper == "H":
            x = a[0] + cx if relative else a[0]
            out.append(RawCommand("H", (x,)))
            cx = x
        elif upper == "V":
            y = a[0] + cy if relative else a[0]
            out.append(RawCommand("V", (y,)))
            cy = y
        elif upper in ("C", "S", "Q", "T"):
            coords = list(a)
            if relative:
                coords = [
                    v + (cx if i % 2 == 0 else cy) for i, v in enumerate(coords)
                ]
            out.append(RawCommand(upper, tuple(coords)))
            cx, cy = coords[-2], coords[-1]
        elif upper == "A":
            rx, ry, rot, laf, sf, x, y = a
            if relative:
                x += cx
                y += cy
            out.append(RawCommand("A", (rx, ry, rot, laf, sf, x, y)))
            cx, cy = x, y
        elif upper == "Z":
            out.append(RawCommand("Z", ()))
            cx, cy = sx, sy
    return out


# ---------------------------------------------------------------------------
# stage: restrict vocabulary


def restrict_vocabulary(commands: list[RawCommand]) -> list[PathCommand]:
    """Rewrite absolute commands into the five canonical kinds.

    H/V become lines; Q/T are degree-elevated to cubics; S gets its
    reflected first control point resolved.  The input must already be
    absolute.
    """
    out: list[PathCommand] = []
    cx = cy = 0.0
    sx = sy = 0.0
    last_letter = ""
    last_cubic_c2 = (0.0, 0.0)
    last_quad_q = (0.0, 0.0)

    for cmd in commands:
        letter = cmd.letter
        a = cmd.args
        if letter == "M":
            out.append(Move(a[0], a[1]))
            cx, cy, sx, sy = a[0], a[1], a[0], a[1]
        elif letter == "L":
            out.append(Line(a[0], a[1]))
            cx, cy = a
        elif letter == "H":
            out.append(Line(a[0], cy))
            cx = a[0]
        elif letter == "V":
            out.append(Line(cx, a[0]))
            cy = a[0]
        elif letter == "C":
            out.append(Cubic(*a))
            last_cubic_c2 = (a[2], a[3])
            cx, cy = a[4], a[5]
        elif letter == "S":
            if last_letter in ("C", "S"):
                c1 = (2.0 * cx - last_cubic_c2[0], 2.0 * cy - last_cubic_c2[1])
            else:
                c1 = (cx, cy)
            out.append(Cubic(c1[0], c1[1], a[0], a[1], a[2], a[3]))
            last_cubic_c2 = (a[0], a[1])
            cx, cy = a[2], a[3]
        elif letter == "Q":
            out.append(_elevate_quadratic(cx, cy, a[0], a[1], a[2], a[3]))
            last_quad_q = (a[0], a[1])
            cx, cy = a[2], a[3]
        elif letter == "T":
            if last_letter in ("Q", "T"):
                q = (2.0 * cx - last_quad_q[0], 2.0 * cy - last_quad_q[1])
            else:
                q = (cx, cy)
            out.append(_elevate_quadratic(cx, cy, q[0], q[1], a[0], a[1]))
            last_quad_q = q
            cx, cy = a
        elif letter == "A":
            rx, ry, rot, laf, sf, x, y = a
            out.append(Arc(abs(rx), abs(ry), rot, int(laf), int(sf), x, y))
            cx, cy = x, y
        elif letter == "Z":
            out.append(Close())
            cx, cy = sx, sy
        else:
            raise ValueError(f"unexpected letter {letter!r}; absolutize first")
        last_letter = letter
    return out


def _elevate_quadratic(x0, y0, qx, qy, x, y) -> Cubic:
    # Exact degree elevation: control points sit two thirds of the way
    # from each endpoint to the quadratic control point.
    return Cubic(
        x0 + 2.0 * (qx - x0) / 3.0,
        y0 + 2.0 * (qy - y0) / 3.0,
        x + 2.0 * (qx - x) / 3.0,
        y + 2.0 * (qy - y) / 3.0,
        x, y,
    )


# ---------------------------------------------------------------------------
# stage: rescale into the canonical viewBox


def rescale_viewbox(
    paths: list[tuple[Rgb, list[PathCommand]]],
    view_box: tuple[float, float, float, float],
) -> list[tuple[Rgb, list[PathCommand]]]:
    """Map source viewBox coordinates into 0 0 200 200.

    Uniform scale preserving aspect ratio, centered on the short axis:
    the scale is min(200/w, 200/h) and the leftover space is split evenly.
    """
    min_x, min_y, w, h = view_box
    if w <= 0 or h <= 0:
        raise RejectError(RejectReason("non-renderable", "degenerate viewBox"))
    s = min(CANONICAL_SIZE / w, CANONICAL_SIZE / h)
    off_x = (CANONICAL_SIZE - s * w) / 2.0
    off_y = (CANONICAL_SIZE - s * h) / 2.0

    def px(x: float) -> float:
        return s * (x - min_x) + off_x

    def py(y: float) -> float:
        return s * (y - min_y) + off_y

    out = []
    for fill, commands in paths:
        scaled: list[PathCommand] = []
        for cmd in commands:
            if isinstance(cmd, Move):
                scaled.append(Move(px(cmd.x), py(cmd.y)))
            elif isinstance(cmd, Line):
                scaled.append(Line(px(cmd.x), py(cmd.y)))
            elif isinstance(cmd, Cubic):
                scaled.append(Cubic(
                    px(cmd.x1), py(cmd.y1), px(cmd.x2), py(cmd.y2),
                    px(cmd.x), py(cmd.y),
                ))
            elif isinstance(cmd, Arc):
                scaled.append(Arc(
                    cmd.rx * s, cmd.ry * s, cmd.rotation,
                    cmd.large_arc, cmd.sweep, px(cmd.x), py(cmd.y),
                ))
            else:
                scaled.append(cmd)
        out.append((fill, scaled))
    return out


# ---------------------------------------------------------------------------
# stage: quantize


def _iround(value: float) -> int:
    """Round half away from zero, the rounding rule for canonical output."""
    return int(math.floor(value + 0.5)) if value >= 0 else int(math.ceil(value - 0.5))


def quantize(paths: list[tuple[Rgb, list[PathCommand]]]
             ) -> list[tuple[Rgb, list[PathCommand]]]:
    """Snap every coordinate to an integer.

    Arcs whose radii collapse to zero degrade to a line to their
    (rounded) endpoint.
    """
    out = []
    for fill, commands in paths:
        snapped: list[PathCommand] = []
        for cmd in commands:
            if isinstance(cmd, Move):
                snapped.append(Move(_iround(cmd.x), _iround(cmd.y)))
            elif isinstance(cmd, Line):
                snapped.append(Line(_iround(cmd.x), _iround(cmd.y)))
            elif isinstance(cmd, Cubic):
                snapped.append(Cubic(
                    _iround(cmd.x1), _iround(cmd.y1),
                    _iround(cmd.x2), _iround(cmd.y2),
                    _iround(cmd.x), _iround(cmd.y),
                ))
            elif isinstance(cmd, Arc):
                rx = _iround(cmd.rx)
                ry = _iround(cmd.ry)
                if rx == 0 or ry == 0:
                    snapped.append(Line(_iround(cmd.x), _iround(cmd.y)))
                else:
                    snapped.append(Arc(
                        rx, ry, _iround(cmd.rotation),
                        cmd.large_arc, cmd.sweep,
                        _iround(cmd.x), _iround(cmd.y),
                    ))
            else:
                snapped.append(cmd)
        out.append((fill, snapped))
    return out


# ---------------------------------------------------------------------------
# serialization


def serialize_canonical(doc: CanonicalDocument) -> str:
    """Byte-stable canonical serialization.

    One line, fixed header, fill before d, single spaces, no commas, a
    command letter fused to its first argument, uppercase hex colors.
    """
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 200 200">']
    for path in doc.paths:
        d = " ".join(_serialize_command(cmd) for cmd in path.commands)
        parts.append(f'<path fill="{path.fill.hex()}" d="{d}" />')
    parts.append("</svg>")
    return "".join(parts)


def _serialize_command(cmd: PathCommand) -> str:
    args = cmd.args()
    if not args:
        return cmd.letter
    return cmd.letter + " ".join(_int_str(v) for v in args)


def _int_str(value: float) -> str:
    return str(int(value))


# ---------------------------------------------------------------------------
# filtering


def filter_sample(doc: CanonicalDocument, cfg: NormalizeConfig | None = None
                  ) -> RejectReason | None:
    """Decide whether a canonical document is worth keeping.

    Returns None to keep, or the reason to reject.  Gate order: empty,
    monochrome, too-long, then the render check (most expensive last).
    """
    cfg = cfg or NormalizeConfig()
    if not doc.paths:
        return RejectReason("empty", "no paths")

    fills = {p.fill for p in doc.paths}
    if len(fills) <= 1:
        only = next(iter(fills))
        return RejectReason("monochrome", only.hex())

    text = serialize_canonical(doc)
    tokens = token_proxy(text, cfg.token_divisor, cfg.tokenizer_cmd)
    if tokens > cfg.token_limit:
        return RejectReason("too-long", f"{tokens} tokens > {cfg.token_limit}")

    from .raster.checks import has_painted_pixel

    if not has_painted_pixel(doc, cfg.render_check_size):
        return RejectReason("non-renderable", "no painted pixel at render check")
    return None


# ---------------------------------------------------------------------------
# pipeline entry points


def canonical_document(text: str, cfg: NormalizeConfig | None = None) -> CanonicalDocument:
    """Run the geometry stages (through quantize); no keep/reject gates.

    Raises ParseError or RejectError on inputs that cannot be brought to
    canonical form at all.
    """
    raw = parse.parse_document(text)
    raw = shapes_to_paths(raw)
    flat = flatten_tree(raw)
    restricted = []
    for fill, commands in flat:
        path_cmds = restrict_vocabulary(absolutize(commands))
        if path_cmds:
            restricted.append((fill, path_cmds))
    scaled = rescale_viewbox(restricted, raw.view_box)
    snapped = quantize(scaled)
    return CanonicalDocument(paths=[
        CanonicalPath(fill=fill, commands=tuple(commands))
        for fill, commands in snapped
        if commands
    ])


def normalize_pipeline(text: str, cfg: NormalizeConfig | None = None
                       ) -> Normalized | Rejected:
    """Full pipeline: canonical form plus the keep/reject gates."""
    cfg = cfg or NormalizeConfig()
    try:
        doc = canonical_document(text, cfg)
    except ParseError as exc:
        return Rejected(RejectReason("non-renderable", f"parse: {exc}"))
    except RejectError as exc:
        return Rejected(exc.reason)
    reason = filter_sample(doc, cfg)
    if reason is not None:
        return Rejected(reason)
    out = serialize_canonical(doc)
    return Normalized(out, compute_stats(doc, out, cfg))


def compute_stats(doc: CanonicalDocument, text: str,
                  cfg: NormalizeConfig | None = None) -> SampleStats:
    cfg = cfg or NormalizeConfig()
    histogram: dict[str, int] = {}
    total = 0
    for path in doc.paths:
        for cmd in path.commands:
            histogram[cmd.letter] = histogram.get(cmd.letter, 0) + 1
            total += 1
    return SampleStats(
        paths=len(doc.paths),
        commands=total,
        command_histogram=dict(sorted(histogram.items())),
        colors=len({p.fill for p in doc.paths}),
        token_estimate=token_proxy(text, cfg.token_divisor, cfg.tokenizer_cmd),
    )


# ---------------------------------------------------------------------------
# token estimation


def token_proxy(text: str, divisor: int = TOKEN_DIVISOR,
                tokenizer_cmd: str | None = None) -> int:
    """Estimate the token count of text.

    By default a byte-length heuristic: ceil(bytes / divisor).  When an
    external tokenizer command is configured it is run with the text on
    stdin and must print a count; any failure falls back to the
    heuristic with a warning.
    """
    if tokenizer_cmd:
        try:
            proc = subprocess.run(
                shlex.split(tokenizer_cmd),
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=30,
            )
            if proc.returncode != 0:
                raise RuntimeError(f"exit status {proc.returncode}")
            return int(proc.stdout.strip())
        except Exception as exc:
            logger.warning("external tokenizer failed (%s); using byte heuristic", exc)
    return math.ceil(len(text.encode("utf-8")) / divisor)
