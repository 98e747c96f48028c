# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scanline fill kernel.

Same algorithm and arithmetic as _scanfill_py (the NumPy reference):
nonzero winding, pixel-center sampling, half-open edge rule in y,
half-open spans in x, crossings ordered by a stable sort.  Keeping the
floating-point expressions identical makes the two kernels produce
bitwise-equal masks.
"""

from libc.math cimport ceil, floor
from libc.stdlib cimport free, malloc


def fill_edges(const double[::1] ex0, const double[::1] ey0,
               const double[::1] ex1, const double[::1] ey1,
               unsigned char[:, ::1] out):
    """Fill out (uint8, shape (H, W)) with 1 where winding is nonzero."""
    cdef Py_ssize_t n = ex0.shape[0]
    cdef Py_ssize_t height = out.shape[0]
    cdef Py_ssize_t width = out.shape[1]
    if n == 0 or height == 0 or width == 0:
        return

    cdef Py_ssize_t i, j, k, m, count, a, b, j0, j1
    cdef double ymin = ey0[0]
    cdef double ymax = ey0[0]
    for i in range(n):
        if ey0[i] < ymin: ymin = ey0[i]
        if ey1[i] < ymin: ymin = ey1[i]
        if ey0[i] > ymax: ymax = ey0[i]
        if ey1[i] > ymax: ymax = ey1[i]
    j0 = <Py_ssize_t>floor(ymin) - 1
    j1 = <Py_ssize_t>ceil(ymax) + 1
    if j0 < 0: j0 = 0
    if j1 > height - 1: j1 = height - 1

    cdef double *xs = <double *>malloc(n * sizeof(double))
    cdef int *dirs = <int *>malloc(n * sizeof(int))
    if xs == NULL or dirs == NULL:
        free(xs)
        free(dirs)
        raise MemoryError()

    cdef double yc, t, xv
    cdef int dv, winding
    try:
        for j in range(j0, j1 + 1):
            yc = j + 0.5
            count = 0
            for i in range(n):
                if (ey0[i] <= yc and ey1[i] > yc) or (ey1[i] <= yc and ey0[i] > yc):
                    t = (yc - ey0[i]) / (ey1[i] - ey0[i])
                    xv = ex0[i] + t * (ex1[i] - ex0[i])
                    dv = 1 if ey1[i] > ey0[i] else -1
                    # stable insertion keeps equal-x crossings in edge order
                    k = count
                    while k > 0 and xs[k - 1] > xv:
                        xs[k] = xs[k - 1]
                        dirs[k] = dirs[k - 1]
                        k -= 1
                    xs[k] = xv
                    dirs[k] = dv
                    count += 1
            if count < 2:
                continue
            winding = 0
            for k in range(count - 1):
                winding += dirs[k]
                if winding != 0:
                    a = <Py_ssize_t>ceil(xs[k] - 0.5)
                    b = <Py_ssize_t>ceil(xs[k + 1] - 0.5)
                    if a < 0: a = 0
                    if b > width: b = width
                    for m in range(a, b):
                        out[j, m] = 1
    finally:
        free(xs)
        free(dirs)
