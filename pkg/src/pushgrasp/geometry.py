"""Planar convex geometry: footprints, overlap tests and translational contact.

Footprints are either convex polygons (CCW vertex arrays) or discs.  The
contact routines answer "for which translations ``t`` along unit direction
``u`` does moving body A overlap body B"; the answer is a closed interval
because the Minkowski difference of two convex bodies is convex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Interior tolerance: bodies touching along a boundary do not count as overlapping.
CONTACT_EPS = 1e-9


@dataclass(frozen=True)
class Polygon:
    verts: np.ndarray  # (n, 2), counter-clockwise

    def translated(self, d) -> "Polygon":
        return Polygon(self.verts + np.asarray(d, dtype=np.float64))

    def bounds(self):
        lo = self.verts.min(axis=0)
        hi = self.verts.max(axis=0)
        return lo[0], lo[1], hi[0], hi[1]

    def extent_along(self, axis) -> float:
        proj = self.verts @ np.asarray(axis, dtype=np.float64)
        return float(proj.max() - proj.min())

    def contains(self, px, py):
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        inside = np.ones(np.broadcast(px, py).shape, dtype=bool)
        n = len(self.verts)
        for i in range(n):
            xa, ya = self.verts[i]
            xb, yb = self.verts[(i + 1) % n]
            inside &= (xb - xa) * (py - ya) - (yb - ya) * (px - xa) >= 0.0
        return inside

    def area(self) -> float:
        x, y = self.verts[:, 0], self.verts[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True)
class Disc:
    center: np.ndarray  # (2,)
    radius: float

    def translated(self, d) -> "Disc":
        return Disc(self.center + np.asarray(d, dtype=np.float64), self.radius)

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def extent_along(self, axis) -> float:
        return 2.0 * self.radius

    def contains(self, px, py):
        dx = np.asarray(px, dtype=np.float64) - self.center[0]
        dy = np.asarray(py, dtype=np.float64) - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius

    def area(self) -> float:
        return math.pi * self.radius ** 2


Footprint = Polygon | Disc


def unit(theta: float) -> np.ndarray:
    """Direction vector with exact zeros on the axes (for 90-degree multiples)."""
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) < 1e-12:
        c = 0.0
    if abs(s) < 1e-12:
        s = 0.0
    return np.array([c, s])


def rect_polygon(center, half_a, half_b, axis) -> Polygon:
    """Rectangle with half-extent ``half_a`` along ``axis`` and ``half_b`` across it."""
    a = np.asarray(axis, dtype=np.float64)
    b = np.array([-a[1], a[0]])
    c = np.asarray(center, dtype=np.float64)
    verts = np.array([
        c - half_a * a - half_b * b,
        c + half_a * a - half_b * b,
        c + half_a * a + half_b * b,
        c - half_a * a + half_b * b,
    ])
    return Polygon(verts)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, CCW, collinear points dropped."""
    pts = sorted(map(tuple, np.asarray(points, dtype=np.float64)))
    pts = list(dict.fromkeys(pts))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


# ---------------------------------------------------------------------------
# Ray intervals.  Each returns (t_in, t_out) or None for the set of t with
# origin + t*u strictly inside the (closed set shrunk by ``eps``).

def ray_polygon(origin, u, verts, eps=CONTACT_EPS):
    lo, hi = -math.inf, math.inf
    n = len(verts)
    for i in range(n):
        xa, ya = verts[i]
        xb, yb = verts[(i + 1) % n]
        ex, ey = xb - xa, yb - ya
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        nx, ny = ey / norm, -ex / norm  # outward for CCW
        a = nx * (origin[0] - xa) + ny * (origin[1] - ya) + eps
        b = nx * u[0] + ny * u[1]
        if b == 0.0:
            if a > 0.0:
                return None
        elif b > 0.0:
            hi = min(hi, -a / b)
        else:
            lo = max(lo, -a / b)
        if lo > hi:
            return None
    return lo, hi


def ray_circle(origin, u, center, radius, eps=CONTACT_EPS):
    r = radius - eps
    if r <= 0.0:
        return None
    ox, oy = origin[0] - center[0], origin[1] - center[1]
    b = ox * u[0] + oy * u[1]
    c = ox * ox + oy * oy - r * r
    disc = b * b - c
    if disc <= 0.0:
        return None
    sq = math.sqrt(disc)
    return -b - sq, -b + sq


def ray_rounded_polygon(origin, u, verts, radius, eps=CONTACT_EPS):
    """Ray against the Minkowski sum of a convex polygon and a disc."""
    parts = [ray_polygon(origin, u, verts, eps)]
    n = len(verts)
    for i in range(n):
        va = verts[i]
        vb = verts[(i + 1) % n]
        parts.append(ray_circle(origin, u, va, radius, eps))
        e = vb - va
        norm = math.hypot(e[0], e[1])
        if norm == 0.0:
            continue
        nrm = np.array([e[1], -e[0]]) / norm
        slab = np.array([va, va + radius * nrm, vb + radius * nrm, vb])  # CCW
        parts.append(ray_polygon(origin, u, slab, eps))
    parts = [p for p in parts if p is not None and p[0] <= p[1]]
    if not parts:
        return None
    return min(p[0] for p in parts), max(p[1] for p in parts)


def translation_interval(moving: Footprint, fixed: Footprint, u):
    """Interval of t for which ``moving + t*u`` overlaps ``fixed`` (interiors)."""
    origin = (0.0, 0.0)
    if isinstance(moving, Disc) and isinstance(fixed, Disc):
        return ray_circle(origin, u, fixed.center - moving.center,
                          moving.radius + fixed.radius)
    if isinstance(moving, Disc):
        return ray_rounded_polygon(origin, u, fixed.verts - moving.center, moving.radius)
    if isinstance(fixed, Disc):
        reflected = fixed.center - moving.verts
        return ray_rounded_polygon(origin, u, reflected, fixed.radius)
    diffs = (fixed.verts[:, None, :] - moving.verts[None, :, :]).reshape(-1, 2)
    hull = convex_hull(diffs)
    if len(hull) < 3:
        return None
    return ray_polygon(origin, u, hull)


def overlaps(a: Footprint, b: Footprint, eps=CONTACT_EPS) -> bool:
    """True if the interiors of ``a`` and ``b`` intersect (beyond ``eps``)."""
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    if ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0:
        return False
    # zero translation inside the Minkowski difference  <=>  overlap
    iv = translation_interval(a, b, (1.0, 0.0))
    return iv is not None and iv[0] < 0.0 < iv[1]


def travel_to_bounds(fp: Footprint, u, bounds) -> float:
    """Largest t >= 0 with ``fp + t*u`` inside ``bounds = (x0, y0, x1, y1)``."""
    if isinstance(fp, Disc):
        pts = fp.center[None, :]
        pad = fp.radius
    else:
        pts = fp.verts
        pad = 0.0
    lo_hi = ((bounds[0], bounds[2]), (bounds[1], bounds[3]))
    best = math.inf
    for axis in (0, 1):
        lo, hi = lo_hi[axis]
        ua = u[axis]
        if ua > 0.0:
            best = min(best, float(((hi - pad) - pts[:, axis]).min()) / ua)
        elif ua < 0.0:
            best = min(best, float(((lo + pad) - pts[:, axis]).max()) / ua)
    return max(best, 0.0)


def inside_bounds(fp: Footprint, bounds, tol: float = 1e-9) -> bool:
    x0, y0, x1, y1 = fp.bounds()
    return (x0 >= bounds[0] - tol and y0 >= bounds[1] - tol
            and x1 <= bounds[2] + tol and y1 <= bounds[3] + tol)
