"""Lenient reader for a pragmatic slice of SVG.

Accepts the full path-data grammar (all command letters, relative forms,
implicit repetition, comma or whitespace separation, scientific notation),
the basic shape elements, nested groups with affine transforms, and solid
fills written as hex, ``rgb()``, or the 16 basic CSS keywords.  Everything
else is either skipped with a warning (invisible machinery such as
``<defs>``) or recorded as unsupported so later stages can reject the
sample instead of mis-rendering it.
"""

from __future__ import annotations

import logging
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from . import geom

logger = logging.getLogger(__name__)

MAX_GROUP_DEPTH = 64

# Path-data command letters mapped to per-group argument counts.
ARITY = {
    "M": 2, "L": 2, "H": 1, "V": 1,
    "C": 6, "S": 4, "Q": 4, "T": 2,
    "A": 7, "Z": 0,
}

_NUMBER_RE = re.compile(r"[+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?")
_VIEWBOX_SPLIT_RE = re.compile(r"[\s,]+")
_LENGTH_RE = re.compile(r"^\s*([+-]?(?:\d*\.\d+|\d+\.?)(?:[eE][+-]?\d+)?)\s*([a-z%]*)\s*$")
_HEX_COLOR_RE = re.compile(r"^#([0-9a-fA-F]{3}|[0-9a-fA-F]{6})$")
_RGB_FUNC_RE = re.compile(r"^rgb\(\s*([^)]*)\)$", re.IGNORECASE)
_TRANSFORM_RE = re.compile(r"([a-zA-Z]+)\s*\(([^)]*)\)")

# The 16 basic CSS color keywords.
CSS_COLORS = {
    "aqua": (0, 255, 255), "black": (0, 0, 0), "blue": (0, 0, 255),
    "fuchsia": (255, 0, 255), "gray": (128, 128, 128), "green": (0, 128, 0),
    "lime": (0, 255, 0), "maroon": (128, 0, 0), "navy": (0, 0, 128),
    "olive": (128, 128, 0), "purple": (128, 0, 128), "red": (255, 0, 0),
    "silver": (192, 192, 192), "teal": (0, 128, 128), "white": (255, 255, 255),
    "yellow": (255, 255, 0),
}


class ParseError(ValueError):
    """Raised for malformed input; carries the offset where scanning stopped."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Rgb:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for v in (self.r, self.g, self.b):
            if not (isinstance(v, int) and 0 <= v <= 255):
                raise ValueError(f"channel out of range: {v!r}")

    def hex(self) -> str:
        return f"#{self.r:02X}{self.g:02X}{self.b:02X}"


@dataclass(frozen=True)
class NoneFill:
    """fill="none": the element paints nothing."""


@dataclass(frozen=True)
class Unsupported:
    """A paint we recognize but cannot honor (gradients, currentColor, ...)."""

    kind: str


Paint = Rgb | NoneFill | Unsupported

BLACK = Rgb(0, 0, 0)
WHITE = Rgb(255, 255, 255)


@dataclass(frozen=True)
class RawCommand:
    """One path-data command group exactly as written (case preserved)."""

    letter: str
    args: tuple[float, ...]

    def __post_init__(self):
        if self.letter.upper() not in ARITY:
            raise ValueError(f"unknown command letter {self.letter!r}")
        if len(self.args) != ARITY[self.letter.upper()]:
            raise ValueError(
                f"{self.letter!r} takes {ARITY[self.letter.upper()]} arguments, got {len(self.args)}"
            )


@dataclass
class PathElement:
    commands: list[RawCommand]
    fill: Paint | None = None  # None means "inherit"


@dataclass
class ShapeElement:
    """A basic shape kept in raw form until shape conversion runs."""

    kind: str  # rect | circle | ellipse | line | polyline | polygon
    params: dict[str, float] = field(default_factory=dict)
    points: list[tuple[float, float]] = field(default_factory=list)
    fill: Paint | None = None


@dataclass
class GroupElement:
    children: list[RawElement] = field(default_factory=list)
    transform: geom.Affine = geom.IDENTITY
    fill: Paint | None = None


RawElement = PathElement | ShapeElement | GroupElement


@dataclass
class RawDocument:
    view_box: tuple[float, float, float, float]
    elements: list[RawElement] = field(default_factory=list)
    width: tuple[float, str] | None = None
    height: tuple[float, str] | None = None
    warnings: list[str] = field(default_factory=list)
    unsupported: list[str] = field(default_factory=list)
    dropped_invisible: int = 0


# ---------------------------------------------------------------------------
# path data


class _Scanner:
    """Cursor over a path-data string with SVG separator rules."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def skip_ws(self):
        t = self.text
        while self.pos < len(t) and t[self.pos] in " \t\r\n":
            self.pos += 1

    def skip_separators(self):
        # wsp* comma? wsp*  (at most one comma between values)
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == ",":
            self.pos += 1
            self.skip_ws()

    def read_number(self, what: str) -> float:
        m = _NUMBER_RE.match(self.text, self.pos)
        if m is None:
            raise ParseError(f"expected {what}", self.pos)
        self.pos = m.end()
        value = float(m.group())
        if not math.isfinite(value):
            raise ParseError(f"non-finite {what}", m.start())
        return value

    def read_flag(self) -> float:
        # Arc flags are single characters; "11" is two flags, not eleven.
        if self.pos < len(self.text) and self.text[self.pos] in "01":
            flag = float(self.text[self.pos])
            self.pos += 1
            return flag
        raise ParseError("arc flag must be 0 or 1", self.pos)


def parse_path_data(d: str) -> list[RawCommand]:
    """Tokenize path data into command groups.

    Implicit repetition is expanded: ``M 0 0 10 10`` yields a Move then a
    Line, and ``L 1 2 3 4`` yields two Lines.  Only finite numbers are
    accepted.  Raises :class:`ParseError` with the offending offset.
    """
    scanner = _Scanner(d)
    commands: list[RawCommand] = []
    repeat: str | None = None

    scanner.skip_ws()
    while not scanner.at_end():
        ch = scanner.text[scanner.pos]
        if ch.upper() in ARITY:
            letter = ch
            scanner.pos += 1
        elif repeat is not None and (ch in "+-.0123456789"):
            letter = repeat
        elif repeat is None:
            raise ParseError("path data must start with a command letter", scanner.pos)
        else:
            raise ParseError(f"unexpected character {ch!r}", scanner.pos)

        arity = ARITY[letter.upper()]
        args: list[float] = []
        for i in range(arity):
            scanner.skip_separators()
            if letter.upper() == "A" and i in (3, 4):
                args.append(scanner.read_flag())
            else:
                args.append(scanner.read_number(f"number ({letter} argument {i + 1})"))
        commands.append(RawCommand(letter, tuple(args)))

        if letter.upper() == "Z":
            repeat = None  # a number after Z is an error
        elif letter == "M":
            repeat = "L"
        elif letter == "m":
            repeat = "l"
        else:
            repeat = letter
        scanner.skip_separators()

    return commands


def serialize_path_data(commands: list[RawCommand]) -> str:
    """Render commands back to a d-string (space separated, full precision)."""
    parts = []
    for cmd in commands:
        args = " ".join(_format_number(a) for a in cmd.args)
        parts.append(cmd.letter + (" " + args if args else ""))
    return " ".join(parts)


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


# ---------------------------------------------------------------------------
# paint


def parse_color(text: str) -> Paint:
    """Parse a fill value into a concrete paint.

    Unknown or unusable paints come back as :class:`Unsupported` rather
    than raising; the decision to reject belongs to the caller.
    """
    s = text.strip()
    lower = s.lower()
    if lower == "none":
        return NoneFill()
    if lower == "currentcolor":
        return Unsupported("currentColor")
    if lower.startswith("url("):
        return Unsupported("url")

    m = _HEX_COLOR_RE.match(s)
    if m:
        digits = m.group(1)
        if len(digits) == 3:
            digits = "".join(c * 2 for c in digits)
        return Rgb(int(digits[0:2], 16), int(digits[2:4], 16), int(digits[4:6], 16))

    m = _RGB_FUNC_RE.match(s)
    if m:
        parts = [p.strip() for p in re.split(r"[,\s]+", m.group(1).strip()) if p.strip()]
        if len(parts) == 3:
            try:
                channels = [_rgb_channel(p) for p in parts]
            except ValueError:
                return Unsupported(f"unknown {s[:32]!r}")
            return Rgb(*channels)
        return Unsupported(f"unknown {s[:32]!r}")

    if lower in CSS_COLORS:
        return Rgb(*CSS_COLORS[lower])
    return Unsupported(f"unknown {s[:32]!r}")


def _rgb_channel(part: str) -> int:
    if part.endswith("%"):
        value = float(part[:-1]) * 255.0 / 100.0
    else:
        value = float(part)
    return max(0, min(255, int(round(value))))


# ---------------------------------------------------------------------------
# transforms


def parse_transform(text: str) -> geom.Affine:
    """Parse a transform list into a single affine matrix.

    Functions compose left to right, matching document order.
    """
    result = geom.IDENTITY
    matched_spans = []
    for m in _TRANSFORM_RE.finditer(text):
        matched_spans.append(m.span())
        name = m.group(1)
        args = [float(v) for v in _VIEWBOX_SPLIT_RE.split(m.group(2).strip()) if v]
        result = geom.multiply(result, _transform_function(name, args, m.start()))

    # Anything outside the matched function calls must be separators.
    leftover = text
    for start, end in reversed(matched_spans):
        leftover = leftover[:start] + leftover[end:]
    if leftover.strip().strip(","):
        raise ParseError(f"unparsable transform {text!r}")
    return result


def _transform_function(name: str, args: list[float], offset: int) -> geom.Affine:
    if name == "translate":
        if len(args) == 1:
            return geom.translation(args[0])
        if len(args) == 2:
            return geom.translation(args[0], args[1])
    elif name == "scale":
        if len(args) == 1:
            return geom.scaling(args[0])
        if len(args) == 2:
            return geom.scaling(args[0], args[1])
    elif name == "rotate":
        if len(args) == 1:
            return geom.rotation_deg(args[0])
        if len(args) == 3:
            return geom.rotation_deg(args[0], args[1], args[2])
    elif name == "skewX":
        if len(args) == 1:
            return geom.skew_x_deg(args[0])
    elif name == "skewY":
        if len(args) == 1:
            return geom.skew_y_deg(args[0])
    elif name == "matrix":
        if len(args) == 6:
            return (args[0], args[1], args[2], args[3], args[4], args[5])
    else:
        raise ParseError(f"unknown transform function {name!r}", offset)
    raise ParseError(f"wrong argument count for {name!r}", offset)


# ---------------------------------------------------------------------------
# documents

_SKIPPED_TAGS = {
    "defs", "style", "title", "desc", "metadata", "script", "symbol",
    "clipPath", "mask", "marker", "pattern", "linearGradient",
    "radialGradient", "filter", "a", "switch", "view",
}
_UNSUPPORTED_TAGS = {"use", "image", "text", "tspan", "textPath", "foreignObject"}


def parse_document(text: str) -> RawDocument:
    """Parse an SVG document string.

    Raises :class:`ParseError` for malformed XML, a missing coordinate
    system, or broken path data.  Recoverable oddities (unknown elements,
    ignored attributes) land in ``warnings``; elements whose geometry we
    cannot honor land in ``unsupported``.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc

    if _local_name(root.tag) != "svg":
        raise ParseError(f"root element is <{_local_name(root.tag)}>, expected <svg>")

    doc = RawDocument(view_box=(0.0, 0.0, 0.0, 0.0))
    doc.width = _parse_length(root.get("width"))
    doc.height = _parse_length(root.get("height"))

    vb_attr = root.get("viewBox")
    if vb_attr is not None:
        doc.view_box = _parse_view_box(vb_attr)
    elif doc.width is not None and doc.height is not None:
        w, wu = doc.width
        h, hu = doc.height
        if wu in ("", "px") and hu in ("", "px") and w > 0 and h > 0:
            doc.view_box = (0.0, 0.0, w, h)
            doc.warnings.append("viewBox synthesized from width/height")
        else:
            raise ParseError(f"cannot derive a viewBox from width={w}{wu} height={h}{hu}")
    else:
        raise ParseError("no viewBox and no usable width/height")

    for child in root:
        element = _parse_element(child, doc, depth=0)
        if element is not None:
            doc.elements.append(element)
    return doc


def _parse_element(node: ET.Element, doc: RawDocument, depth: int) -> RawElement | None:
    tag = _local_name(node.tag)
    if tag in _SKIPPED_TAGS or isinstance(node.tag, bytes):
        doc.warnings.append(f"skipped <{tag}>")
        return None
    if tag in _UNSUPPORTED_TAGS:
        doc.unsupported.append(tag)
        return None

    if node.get("style") is not None:
        doc.warnings.append(f"ignored style attribute on <{tag}>")

    fill = None
    fill_attr = node.get("fill")
    if fill_attr is not None:
        fill = parse_color(fill_attr)

    transform = geom.IDENTITY
    transform_attr = node.get("transform")
    if transform_attr is not None:
        transform = parse_transform(transform_attr)

    element: RawElement | None
    if tag == "g":
        if depth + 1 > MAX_GROUP_DEPTH:
            raise ParseError(f"group nesting exceeds {MAX_GROUP_DEPTH}")
        group = GroupElement(transform=transform, fill=fill)
        for child in node:
            parsed = _parse_element(child, doc, depth + 1)
            if parsed is not None:
                group.children.append(parsed)
        return group

    if tag == "path":
        d = node.get("d", "")
        element = PathElement(commands=parse_path_data(d), fill=fill)
    elif tag in ("rect", "circle", "ellipse", "line"):
        names = {
            "rect": ("x", "y", "width", "height", "rx", "ry"),
            "circle": ("cx", "cy", "r"),
            "ellipse": ("cx", "cy", "rx", "ry"),
            "line": ("x1", "y1", "x2", "y2"),
        }[tag]
        params = {}
        for name in names:
            raw = node.get(name)
            if raw is not None:
                params[name] = _parse_scalar(raw, f"{tag} {name}")
        element = ShapeElement(kind=tag, params=params, fill=fill)
    elif tag in ("polyline", "polygon"):
        element = ShapeElement(
            kind=tag, points=_parse_points(node.get("points", "")), fill=fill
        )
    else:
        doc.warnings.append(f"skipped unknown element <{tag}>")
        return None

    if transform is not geom.IDENTITY and not geom.is_identity(transform):
        # Per-element transforms ride on a single-child wrapper group so
        # downstream stages only ever see transforms on groups.
        return GroupElement(children=[element], transform=transform)
    return element


def _parse_points(text: str) -> list[tuple[float, float]]:
    values = []
    scanner = _Scanner(text)
    scanner.skip_ws()
    while not scanner.at_end():
        values.append(scanner.read_number("point coordinate"))
        scanner.skip_separators()
    if len(values) % 2 != 0:
        raise ParseError("odd number of point coordinates")
    return [(values[i], values[i + 1]) for i in range(0, len(values), 2)]


def _parse_scalar(raw: str, what: str) -> float:
    m = _LENGTH_RE.match(raw)
    if m is None or m.group(2) not in ("", "px"):
        raise ParseError(f"cannot parse {what}={raw!r}")
    value = float(m.group(1))
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what}")
    return value


def _parse_view_box(raw: str) -> tuple[float, float, float, float]:
    parts = [p for p in _VIEWBOX_SPLIT_RE.split(raw.strip()) if p]
    if len(parts) != 4:
        raise ParseError(f"viewBox needs 4 numbers, got {raw!r}")
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError as exc:
        raise ParseError(f"bad viewBox {raw!r}") from exc
    if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
        raise ParseError(f"degenerate viewBox {raw!r}")
    return (x, y, w, h)


def _parse_length(raw: str | None) -> tuple[float, str] | None:
    if raw is None:
        return None
    m = _LENGTH_RE.match(raw)
    if m is None:
        return None
    return (float(m.group(1)), m.group(2))


def _local_name(tag) -> str:
    if isinstance(tag, str) and tag.startswith("{"):
        return tag.split("}", 1)[1]
    return str(tag)
