"""Pure NumPy scanline fill kernel.

Reference implementation of the nonzero-winding polygon fill; the
compiled kernel in _scanfill.pyx performs the same arithmetic in the
same order so the two produce identical masks.  Sampling rule: a pixel
(i, j) is inside when its center (i + 0.5, j + 0.5) is inside.  Edges
use a half-open rule in y (lower endpoint inclusive) so shared vertices
are counted exactly once, and spans are half-open in x.
"""

from __future__ import annotations

import math

import numpy as np


def fill_edges(ex0, ey0, ex1, ey1, out):
    """Fill out (uint8, shape (H, W)) with 1 where winding is nonzero.

    The four edge arrays give segment endpoints; edges horizontal in y
    never generate crossings and are skipped by the crossing test.
    """
    height, width = out.shape
    n = ex0.shape[0]
    if n == 0 or height == 0 or width == 0:
        return

    ymin = min(float(ey0.min()), float(ey1.min()))
    ymax = max(float(ey0.max()), float(ey1.max()))
    j0 = max(0, int(math.floor(ymin)) - 1)
    j1 = min(height - 1, int(math.ceil(ymax)) + 1)

    for j in range(j0, j1 + 1):
        yc = j + 0.5
        crossing = ((ey0 <= yc) & (ey1 > yc)) | ((ey1 <= yc) & (ey0 > yc))
        idx = np.nonzero(crossing)[0]
        if idx.size < 2:
            continue
        y0 = ey0[idx]
        y1 = ey1[idx]
        t = (yc - y0) / (y1 - y0)
        xs = ex0[idx] + t * (ex1[idx] - ex0[idx])
        dirs = np.where(y1 > y0, 1, -1)
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        winding = np.cumsum(dirs[order])
        for k in range(xs.size - 1):
            if winding[k] != 0:
                a = int(math.ceil(xs[k] - 0.5))
                b = int(math.ceil(xs[k + 1] - 0.5))
                if a < 0:
                    a = 0
                if b > width:
                    b = width
                if a < b:
                    out[j, a:b] = 1
