"""Kernel selection and the ring-filling entry point.

The compiled Cython kernel is used when its extension module imported
cleanly; otherwise the NumPy reference kernel takes over.  Both are also
callable explicitly, which the cross-check tests and the benchmark use.
"""

from __future__ import annotations

import numpy as np

from . import _scanfill_py

try:
    from . import _scanfill  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build environment
    _scanfill = None

HAVE_COMPILED = _scanfill is not None
ACTIVE_KERNEL = "compiled" if HAVE_COMPILED else "python"


def rings_to_edges(rings) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Explode point rings into flat edge-endpoint arrays.

    Each ring contributes its consecutive segments plus the closing
    segment back to its first point.
    """
    ex0: list[float] = []
    ey0: list[float] = []
    ex1: list[float] = []
    ey1: list[float] = []
    for ring in rings:
        count = len(ring)
        if count < 3:
            continue
        for i in range(count):
            x0, y0 = ring[i]
            x1, y1 = ring[(i + 1) % count]
            ex0.append(x0)
            ey0.append(y0)
            ex1.append(x1)
            ey1.append(y1)
    return (
        np.asarray(ex0, dtype=np.float64),
        np.asarray(ey0, dtype=np.float64),
        np.asarray(ex1, dtype=np.float64),
        np.asarray(ey1, dtype=np.float64),
    )


def fill_mask(rings, width: int, height: int, impl: str | None = None) -> np.ndarray:
    """Rasterize rings to a boolean inside-mask of shape (height, width).

    impl selects the kernel: None for the best available, "compiled", or
    "python".  Asking for the compiled kernel when it is not built is an
    error rather than a silent substitution.
    """
    out = np.zeros((height, width), dtype=np.uint8)
    edges = rings_to_edges(rings)
    _kernel(impl)(edges[0], edges[1], edges[2], edges[3], out)
    return out.view(np.bool_)


def _kernel(impl: str | None):
    if impl is None:
        impl = ACTIVE_KERNEL
    if impl == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but not built")
        return _scanfill.fill_edges
    if impl == "python":
        return _scanfill_py.fill_edges
    raise ValueError(f"unknown kernel {impl!r}")
