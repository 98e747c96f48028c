"""Rasterization to RGB images, and the PPM / PNG codecs.

The rasterizer paints canonical documents path by path in document order
onto a solid background, sampling at pixel centers.  Optional 4x
supersampling evaluates a 2x2 grid per pixel and box-downsamples with
deterministic integer rounding.

The PNG encoder writes the minimal still-universal flavor: 8-bit RGB,
filter type 0 on every row, one IDAT, fixed zlib level, so identical
pixels always produce identical bytes.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..model import CANONICAL_SIZE, CanonicalDocument
from ..parse import Rgb
from . import scanfill
from .flatten import flatten_commands

WHITE = Rgb(255, 255, 255)

# Flattening aims for this many pixels of positional error at the output
# resolution.
_PIXEL_TOLERANCE = 0.25

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


@dataclass
class Raster:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8
    background: Rgb = field(default=WHITE)

    @classmethod
    def blank(cls, width: int, height: int, background: Rgb = WHITE) -> Raster:
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[:, :] = (background.r, background.g, background.b)
        return cls(width, height, pixels, background)

    def painted_mask(self) -> np.ndarray:
        """Pixels that differ from the background color."""
        bg = np.array([self.background.r, self.background.g, self.background.b],
                      dtype=np.uint8)
        return np.any(self.pixels != bg, axis=2)


def rasterize(doc: CanonicalDocument, width: int, height: int,
              supersample: bool = False, background: Rgb = WHITE,
              impl: str | None = None) -> Raster:
    """Render a canonical document at width x height.

    Paths paint in document order (painter's algorithm).  With
    supersample=True geometry is rendered at twice the resolution in
    each axis and box-filtered down.
    """
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    ss = 2 if supersample else 1
    big_w = width * ss
    big_h = height * ss
    sx = big_w / CANONICAL_SIZE
    sy = big_h / CANONICAL_SIZE
    tolerance = _PIXEL_TOLERANCE / max(sx, sy)

    buf = np.empty((big_h, big_w, 3), dtype=np.uint8)
    buf[:, :] = (background.r, background.g, background.b)
    for path in doc.paths:
        rings = flatten_commands(path.commands, tolerance)
        if not rings:
            continue
        scaled = [[(x * sx, y * sy) for x, y in ring] for ring in rings]
        mask = scanfill.fill_mask(scaled, big_w, big_h, impl)
        buf[mask] = (path.fill.r, path.fill.g, path.fill.b)

    if ss > 1:
        grouped = buf.reshape(height, ss, width, ss, 3).astype(np.uint32)
        summed = grouped.sum(axis=(1, 3))
        samples = ss * ss
        buf = ((summed + samples // 2) // samples).astype(np.uint8)
    return Raster(width, height, buf, background)


def image_iou(a: Raster, b: Raster, painted=None) -> float:
    """Intersection over union of the painted regions of two rasters.

    painted selects the region: None compares against each image's
    background, an Rgb matches that exact color, and a callable receives
    the pixel array and returns a boolean mask.  Two images with nothing
    painted agree perfectly (IoU 1.0).
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("rasters differ in size")
    mask_a = _select_mask(a, painted)
    mask_b = _select_mask(b, painted)
    union = np.logical_or(mask_a, mask_b).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(mask_a, mask_b).sum()
    return float(inter) / float(union)


def _select_mask(raster: Raster, painted) -> np.ndarray:
    if painted is None:
        return raster.painted_mask()
    if isinstance(painted, Rgb):
        target = np.array([painted.r, painted.g, painted.b], dtype=np.uint8)
        return np.all(raster.pixels == target, axis=2)
    return np.asarray(painted(raster.pixels), dtype=bool)


# ---------------------------------------------------------------------------
# PPM (binary P6)


def encode_ppm(raster: Raster) -> bytes:
    header = f"P6\n{raster.width} {raster.height}\n255\n".encode("ascii")
    return header + raster.pixels.tobytes()


def decode_ppm(data: bytes) -> Raster:
    """Parse binary P6, including comment lines in the header."""
    fields = []
    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1].isspace():
                pos += 1
            elif data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] not in (10, 13):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        return data[start:pos]

    magic = next_token()
    if magic != b"P6":
        raise ValueError(f"not a P6 file: {magic!r}")
    for _ in range(3):
        fields.append(int(next_token()))
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    body = data[pos:pos + expected]
    if len(body) != expected:
        raise ValueError("truncated pixel data")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()
    return Raster(width, height, pixels)


# ---------------------------------------------------------------------------
# PNG


def encode_png(raster: Raster) -> bytes:
    h, w = raster.pixels.shape[:2]
    rows = raster.pixels.reshape(h, w * 3)
    raw = b"".join(b"\x00" + rows[i].tobytes() for i in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    idat = zlib.compress(raw, _ZLIB_LEVEL)
    return (
        _PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", idat)
        + _chunk(b"IEND", b"")
    )


def decode_png(data: bytes) -> Raster:
    """Decode PNGs of the shape this module encodes.

    Supports 8-bit RGB, non-interlaced, with all five standard scanline
    filters, so output from common third-party encoders decodes too.
    """
    if data[:8] != _PNG_SIGNATURE:
        raise ValueError("not a PNG file")
    pos = 8
    width = height = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, color, _, _, interlace = struct.unpack(">IIBBBBB", body)
            if depth != 8 or color != 2 or interlace != 0:
                raise ValueError("only 8-bit non-interlaced RGB is supported")
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
    if width is None:
        raise ValueError("missing IHDR")
    raw = zlib.decompress(idat)
    stride = width * 3
    pixels = np.zeros((height, stride), dtype=np.uint8)
    for j in range(height):
        offset = j * (stride + 1)
        ftype = raw[offset]
        row = np.frombuffer(raw[offset + 1:offset + 1 + stride], dtype=np.uint8)
        if ftype == 0:
            pixels[j] = row
        elif ftype == 1:
            acc = row.astype(np.int64).copy()
            for i in range(3, stride):
                acc[i] = (acc[i] + acc[i - 3]) % 256
            pixels[j] = acc.astype(np.uint8)
        elif ftype == 2:
            prior = pixels[j - 1] if j > 0 else np.zeros(stride, dtype=np.uint8)
            pixels[j] = (row.astype(np.int64) + prior) % 256
        elif ftype == 3:
            prior = pixels[j - 1] if j > 0 else np.zeros(stride, dtype=np.uint8)
            acc = row.astype(np.int64).copy()
            for i in range(stride):
                left = int(acc[i - 3]) if i >= 3 else 0
                acc[i] = (acc[i] + (left + int(prior[i])) // 2) % 256
            pixels[j] = acc.astype(np.uint8)
        elif ftype == 4:
            prior = pixels[j - 1] if j > 0 else np.zeros(stride, dtype=np.uint8)
            acc = row.astype(np.int64).copy()
            for i in range(stride):
                left = int(acc[i - 3]) if i >= 3 else 0
                up = int(prior[i])
                upleft = int(prior[i - 3]) if i >= 3 else 0
                p = left + up - upleft
                pa = abs(p - left)
                pb = abs(p - up)
                pc = abs(p - upleft)
                if pa <= pb and pa <= pc:
                    predictor = left
                elif pb <= pc:
                    predictor = up
                else:
                    predictor = upleft
                acc[i] = (acc[i] + predictor) % 256
            pixels[j] = acc.astype(np.uint8)
        else:
            raise ValueError(f"unsupported filter type {ftype}")
    return Raster(width, height, pixels.reshape(height, width, 3))


def _chunk(tag: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + tag
        + body
        + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF)
    )
