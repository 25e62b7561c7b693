"""Pure numpy implementations of the hot kernels.

These are the reference semantics; the compiled versions in ``_ckernels``
must produce bit-identical output.
"""
import math

import numpy as np


def _window(lo, hi, origin, step, n):
    a = int(math.floor((lo - origin) / step - 0.5)) - 1
    b = int(math.floor((hi - origin) / step - 0.5)) + 2
    return max(a, 0), min(b, n)


def raster_polygon(verts, x0, y0, step, nrows, ncols):
    """Mark cells whose center lies inside (or on) a convex CCW polygon."""
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    out = np.zeros((nrows, ncols), dtype=np.uint8)
    c0, c1 = _window(verts[:, 0].min(), verts[:, 0].max(), x0, step, ncols)
    r0, r1 = _window(verts[:, 1].min(), verts[:, 1].max(), y0, step, nrows)
    if c0 >= c1 or r0 >= r1:
        return out
    px = x0 + (np.arange(c0, c1) + 0.5) * step
    py = y0 + (np.arange(r0, r1) + 0.5) * step
    px = px[None, :]
    py = py[:, None]
    inside = np.ones((r1 - r0, c1 - c0), dtype=bool)
    n = len(verts)
    for i in range(n):
        xa, ya = verts[i]
        xb, yb = verts[(i + 1) % n]
        inside &= (xb - xa) * (py - ya) - (yb - ya) * (px - xa) >= 0.0
    out[r0:r1, c0:c1] = inside
    return out


def raster_disc(cx, cy, radius, x0, y0, step, nrows, ncols):
    out = np.zeros((nrows, ncols), dtype=np.uint8)
    c0, c1 = _window(cx - radius, cx + radius, x0, step, ncols)
    r0, r1 = _window(cy - radius, cy + radius, y0, step, nrows)
    if c0 >= c1 or r0 >= r1:
        return out
    dx = (x0 + (np.arange(c0, c1) + 0.5) * step) - cx
    dy = (y0 + (np.arange(r0, r1) + 0.5) * step) - cy
    dx = dx[None, :]
    dy = dy[:, None]
    out[r0:r1, c0:c1] = dx * dx + dy * dy <= radius * radius
    return out


def rotate_bilinear(img, cos_a, sin_a):
    """Rotate each (H, W) plane of ``img`` (C, H, W) about the grid center.

    ``out[y, x] = img(R(-a) (p - c) + c)`` with zero fill outside the grid.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    C, H, W = img.shape
    cx = (W - 1) / 2.0
    cy = (H - 1) / 2.0
    dx = (np.arange(W, dtype=np.float64) - cx)[None, :]
    dy = (np.arange(H, dtype=np.float64) - cy)[:, None]
    sx = cos_a * dx + sin_a * dy + cx
    sy = -sin_a * dx + cos_a * dy + cy
    fx0 = np.floor(sx)
    fy0 = np.floor(sy)
    fx = sx - fx0
    fy = sy - fy0
    ix = fx0.astype(np.int64)
    iy = fy0.astype(np.int64)
    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy

    def tap(yy, xx):
        valid = (yy >= 0) & (yy < H) & (xx >= 0) & (xx < W)
        v = img[:, np.clip(yy, 0, H - 1), np.clip(xx, 0, W - 1)]
        return np.where(valid[None], v, 0.0)

    a = tap(iy, ix)
    b = tap(iy, ix + 1)
    c = tap(iy + 1, ix)
    d = tap(iy + 1, ix + 1)
    return ((w00 * a + w01 * b) + w10 * c) + w11 * d
