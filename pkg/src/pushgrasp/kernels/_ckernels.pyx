# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; semantics mirror ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline void _window(double lo, double hi, double origin, double step, Py_ssize_t n,
                         Py_ssize_t* a, Py_ssize_t* b) noexcept:
    cdef Py_ssize_t s = <Py_ssize_t>floor((lo - origin) / step - 0.5) - 1
    cdef Py_ssize_t e = <Py_ssize_t>floor((hi - origin) / step - 0.5) + 2
    a[0] = s if s > 0 else 0
    b[0] = e if e < n else n


def raster_polygon(verts, double x0, double y0, double step, Py_ssize_t nrows, Py_ssize_t ncols):
    cdef double[:, ::1] v = np.ascontiguousarray(verts, dtype=np.float64)
    out_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t n = v.shape[0]
    cdef double minx = v[0, 0], maxx = v[0, 0], miny = v[0, 1], maxy = v[0, 1]
    cdef Py_ssize_t i, r, c, r0, r1, c0, c1
    for i in range(1, n):
        if v[i, 0] < minx: minx = v[i, 0]
        if v[i, 0] > maxx: maxx = v[i, 0]
        if v[i, 1] < miny: miny = v[i, 1]
        if v[i, 1] > maxy: maxy = v[i, 1]
    _window(minx, maxx, x0, step, ncols, &c0, &c1)
    _window(miny, maxy, y0, step, nrows, &r0, &r1)
    cdef double px, py, xa, ya, xb, yb
    cdef bint inside
    for r in range(r0, r1):
        py = y0 + (r + 0.5) * step
        for c in range(c0, c1):
            px = x0 + (c + 0.5) * step
            inside = True
            for i in range(n):
                xa = v[i, 0]
                ya = v[i, 1]
                xb = v[(i + 1) % n, 0]
                yb = v[(i + 1) % n, 1]
                if (xb - xa) * (py - ya) - (yb - ya) * (px - xa) < 0.0:
                    inside = False
                    break
            if inside:
                out[r, c] = 1
    return out_arr


def raster_disc(double cx, double cy, double radius, double x0, double y0, double step,
                Py_ssize_t nrows, Py_ssize_t ncols):
    out_arr = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t r, c, r0, r1, c0, c1
    _window(cx - radius, cx + radius, x0, step, ncols, &c0, &c1)
    _window(cy - radius, cy + radius, y0, step, nrows, &r0, &r1)
    cdef double dx, dy, rr = radius * radius
    for r in range(r0, r1):
        dy = (y0 + (r + 0.5) * step) - cy
        for c in range(c0, c1):
            dx = (x0 + (c + 0.5) * step) - cx
            if dx * dx + dy * dy <= rr:
                out[r, c] = 1
    return out_arr


def rotate_bilinear(img, double cos_a, double sin_a):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t C = src.shape[0], H = src.shape[1], W = src.shape[2]
    out_arr = np.empty((C, H, W), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0
    cdef double dx, dy, sx, sy, fx0, fy0, fx, fy, w00, w01, w10, w11, a, b, c, d
    cdef Py_ssize_t y, x, ch, ix, iy
    cdef bint va, vb, vc, vd
    for y in range(H):
        dy = y - cy
        for x in range(W):
            dx = x - cx
            sx = cos_a * dx + sin_a * dy + cx
            sy = -sin_a * dx + cos_a * dy + cy
            fx0 = floor(sx)
            fy0 = floor(sy)
            fx = sx - fx0
            fy = sy - fy0
            ix = <Py_ssize_t>fx0
            iy = <Py_ssize_t>fy0
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            va = iy >= 0 and iy < H and ix >= 0 and ix < W
            vb = iy >= 0 and iy < H and ix + 1 >= 0 and ix + 1 < W
            vc = iy + 1 >= 0 and iy + 1 < H and ix >= 0 and ix < W
            vd = iy + 1 >= 0 and iy + 1 < H and ix + 1 >= 0 and ix + 1 < W
            for ch in range(C):
                a = src[ch, iy, ix] if va else 0.0
                b = src[ch, iy, ix + 1] if vb else 0.0
                c = src[ch, iy + 1, ix] if vc else 0.0
                d = src[ch, iy + 1, ix + 1] if vd else 0.0
                out[ch, y, x] = ((w00 * a + w01 * b) + w10 * c) + w11 * d
    return out_arr
