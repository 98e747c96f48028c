"""Renderability checks on SVG text and canonical documents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import CANONICAL_SIZE, CanonicalDocument
from . import scanfill
from .flatten import flatten_commands


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    detail: str = ""


def coverage_mask(doc: CanonicalDocument, size: int = 200) -> np.ndarray:
    """Union of every path's filled region at size x size."""
    scale = size / CANONICAL_SIZE
    mask = np.zeros((size, size), dtype=bool)
    for path in doc.paths:
        mask |= _path_mask(path, size, scale)
    return mask


def has_painted_pixel(doc: CanonicalDocument, size: int = 200) -> bool:
    """True when any path covers at least one pixel center.

    Coverage, not color: a white shape on the white background still
    counts as painted geometry.  Short-circuits on the first hit.
    """
    scale = size / CANONICAL_SIZE
    for path in doc.paths:
        if _path_mask(path, size, scale).any():
            return True
    return False


def _path_mask(path, size: int, scale: float) -> np.ndarray:
    rings = flatten_commands(path.commands)
    if not rings:
        return np.zeros((size, size), dtype=bool)
    scaled = [[(x * scale, y * scale) for x, y in ring] for ring in rings]
    return scanfill.fill_mask(scaled, size, size)


def render_check(text: str, size: int = 200) -> CheckResult:
    """Can this SVG text be brought to canonical form and show anything?

    Fails with the blocking reason: a parse error, a rejection from the
    geometry stages, or geometry that covers no pixel center.
    """
    from .. import normalize
    from ..parse import ParseError

    try:
        doc = normalize.canonical_document(text)
    except ParseError as exc:
        return CheckResult(False, f"parse: {exc}")
    except normalize.RejectError as exc:
        return CheckResult(False, f"{exc.reason.kind}: {exc.reason.detail}")
    if not has_painted_pixel(doc, size):
        return CheckResult(False, "no painted pixel")
    return CheckResult(True, "")
