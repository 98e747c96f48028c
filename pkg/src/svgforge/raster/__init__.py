"""Rasterization: arc math, curve flattening, scanline fill, image codecs."""

from .arcs import CenterArc, arc_center_to_endpoint, arc_endpoint_to_center, arc_to_cubics
from .checks import CheckResult, coverage_mask, has_painted_pixel, render_check
from .flatten import flatten_commands
from .image import (
    Raster,
    decode_png,
    decode_ppm,
    encode_png,
    encode_ppm,
    image_iou,
    rasterize,
)
from .scanfill import ACTIVE_KERNEL, HAVE_COMPILED, fill_mask

__all__ = [
    "ACTIVE_KERNEL",
    "CenterArc",
    "CheckResult",
    "HAVE_COMPILED",
    "Raster",
    "arc_center_to_endpoint",
    "arc_endpoint_to_center",
    "arc_to_cubics",
    "coverage_mask",
    "decode_png",
    "decode_ppm",
    "encode_png",
    "encode_ppm",
    "fill_mask",
    "flatten_commands",
    "has_painted_pixel",
    "image_iou",
    "rasterize",
    "render_check",
]
