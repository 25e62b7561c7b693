"""Heightmap observations, rotated input stacks and goal-neighborhood statistics.

Rotation convention: grid axes are x = column, y = row, and rotating an
image by angle ``a`` moves content counter-clockwise in that frame.  The
input for rotation index ``k = 4q + r`` is built as an exact quarter-turn
permutation by ``-q`` followed by a bilinear rotation by ``-r * 22.5``
degrees.  Splitting it this way makes the whole pipeline exactly
equivariant to 90-degree turns of the scene.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels
from .config import PerceptConfig, WorldConfig
from .errors import EmptyMask, NonSquareGrid, ShapeMismatch
from .world import Scene, raster

N_ROTATIONS = 16
STEP = 2 * math.pi / N_ROTATIONS


@dataclass
class Observation:
    depth: np.ndarray      # (H, W) float64 meters
    color: np.ndarray      # (H, W) int16, -1 where empty
    goal_mask: np.ndarray  # (H, W) bool
    resolution: float

    @property
    def shape(self):
        return self.depth.shape

    @property
    def occupied(self) -> np.ndarray:
        return self.depth > 0.0

    def with_mask(self, mask) -> "Observation":
        return Observation(self.depth, self.color, np.asarray(mask, dtype=bool), self.resolution)

    def __eq__(self, other):
        return (isinstance(other, Observation)
                and np.array_equal(self.depth, other.depth)
                and np.array_equal(self.color, other.color)
                and np.array_equal(self.goal_mask, other.goal_mask)
                and self.resolution == other.resolution)


def object_masks(scene: Scene, grid_size: int) -> dict:
    ws = scene.workspace
    step = ws.size / grid_size
    return {o.object_id: raster(o.footprint(), ws.x0, ws.y0, step, grid_size, grid_size)
            for o in scene.objects}


def render(scene: Scene, world: WorldConfig | None = None, goal_id="scene",
           agnostic: bool = False, masks: dict | None = None) -> Observation:
    """Rasterize a scene onto the heightmap grid.

    ``goal_id`` defaults to the scene's goal; pass an id (or None) to render
    the mask for a different goal.  ``agnostic`` masks every object.
    """
    world = world or WorldConfig()
    n = world.grid_size
    if goal_id == "scene":
        goal_id = scene.goal_id
    masks = masks if masks is not None else object_masks(scene, n)
    depth = np.zeros((n, n))
    color = np.full((n, n), -1, dtype=np.int16)
    goal = np.zeros((n, n), dtype=bool)
    for obj in scene.objects:
        m = masks[obj.object_id]
        top = m & (obj.spec.height > depth)
        depth[top] = obj.spec.height
        color[top] = obj.spec.color
        if agnostic or obj.object_id == goal_id:
            goal |= m
    return Observation(depth, color, goal, scene.workspace.size / n)


def encode(obs: Observation, world: WorldConfig | None = None,
           percept: PerceptConfig | None = None) -> np.ndarray:
    """Network input planes: scaled depth, one-hot color, goal mask."""
    world = world or WorldConfig()
    percept = percept or PerceptConfig()
    H, W = obs.shape
    planes = np.zeros((percept.n_colors + 2, H, W))
    planes[0] = obs.depth / world.height_max
    occ = obs.color >= 0
    rows, cols = np.nonzero(occ)
    planes[1 + obs.color[rows, cols] % percept.n_colors, rows, cols] = 1.0
    planes[-1] = obs.goal_mask
    return planes


def n_input_channels(percept: PerceptConfig | None = None) -> int:
    return (percept or PerceptConfig()).n_colors + 2


# ---------------------------------------------------------------------------
# rotation

def quarter_turn(img: np.ndarray, q: int) -> np.ndarray:
    """Exact rotation by ``q * 90`` degrees on the last two axes."""
    return np.ascontiguousarray(np.rot90(img, k=-(q % 4), axes=(-2, -1)))


def _bilinear(img: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    squeeze = img.ndim == 2
    out = kernels.rotate_bilinear(img[None] if squeeze else img, c, s)
    return out[0] if squeeze else out


def rotate_k(img: np.ndarray, k: int) -> np.ndarray:
    """Rotate (C, H, W) or (H, W) planes by ``-k * 22.5`` degrees."""
    if img.shape[-1] != img.shape[-2]:
        raise NonSquareGrid(f"grid {img.shape[-2]}x{img.shape[-1]} is not square")
    q, r = divmod(k % N_ROTATIONS, 4)
    out = quarter_turn(img, -q)
    if r:
        out = _bilinear(out, -r * STEP)
    return out


def unrotate_k(img: np.ndarray, k: int) -> np.ndarray:
    """Inverse of :func:`rotate_k` up to interpolation loss."""
    q, r = divmod(k % N_ROTATIONS, 4)
    out = img
    if r:
        out = _bilinear(out, r * STEP)
    return quarter_turn(out, q)


def rotate_stack(planes: np.ndarray) -> np.ndarray:
    """(C, H, W) -> (16, C, H, W); entry k is rotated by -k * 22.5 degrees."""
    if planes.ndim == 2:
        planes = planes[None]
    if planes.shape[-1] != planes.shape[-2]:
        raise NonSquareGrid(f"grid {planes.shape[-2]}x{planes.shape[-1]} is not square")
    return np.stack([rotate_k(planes, k) for k in range(N_ROTATIONS)])


def unrotate_taps(k: int, row: int, col: int, n: int):
    """Bilinear taps of pixel (row, col) of ``unrotate_k(M, k)`` into M.

    Returns four ``(r, c, w, valid)`` tuples in the summation order used by
    the kernels, so the weighted sum reproduces the full-map value.
    """
    q, r = divmod(k % N_ROTATIONS, 4)
    y, x = row, col
    for _ in range(q % 4):
        y, x = n - 1 - x, y
    if not r:
        return [(y, x, 1.0, True)]
    a = r * STEP
    cos_a, sin_a = math.cos(a), math.sin(a)
    cx = cy = (n - 1) / 2.0
    dx = x - cx
    dy = y - cy
    sx = cos_a * dx + sin_a * dy + cx
    sy = -sin_a * dx + cos_a * dy + cy
    fx0 = math.floor(sx)
    fy0 = math.floor(sy)
    fx = sx - fx0
    fy = sy - fy0
    ix, iy = int(fx0), int(fy0)
    taps = [(iy, ix, (1.0 - fx) * (1.0 - fy)), (iy, ix + 1, fx * (1.0 - fy)),
            (iy + 1, ix, (1.0 - fx) * fy), (iy + 1, ix + 1, fx * fy)]
    return [(ty, tx, w, 0 <= ty < n and 0 <= tx < n) for ty, tx, w in taps]


# ---------------------------------------------------------------------------
# neighborhood statistics

def ring(mask: np.ndarray, radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disk = xx * xx + yy * yy <= r * r
    return ndimage.binary_dilation(mask, structure=disk) & ~mask


def occupancy_ratio(obs: Observation, radius: int = 4) -> float:
    """Fraction of the goal's surrounding ring covered by other objects."""
    if not obs.goal_mask.any():
        raise EmptyMask("goal mask is empty")
    band = ring(obs.goal_mask, radius)
    total = int(band.sum())
    if total == 0:
        return 0.0
    return int((band & obs.occupied).sum()) / total


def neighborhood_change(before: Observation, after: Observation, radius: int = 4,
                        depth_tolerance: float = 0.001):
    """(changed ring cells, occupancy decrease) between two observations."""
    if before.shape != after.shape:
        raise ShapeMismatch(f"{before.shape} vs {after.shape}")
    if not before.goal_mask.any():
        raise EmptyMask("goal mask of 'before' is empty")
    band = ring(before.goal_mask, radius)
    changed = int((band & (np.abs(after.depth - before.depth) > depth_tolerance)).sum())
    after_obs = after if after.goal_mask.any() else after.with_mask(before.goal_mask)
    o_dec = occupancy_ratio(before, radius) - occupancy_ratio(after_obs, radius)
    return changed, o_dec


# ---------------------------------------------------------------------------
# debugging dumps

def dump_grid_csv(grid: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(grid, dtype=np.float64), delimiter=",", fmt="%.6g")


def dump_pgm(grid: np.ndarray, path, vmax: float | None = None) -> None:
    """Write a binary 8-bit portable graymap."""
    g = np.asarray(grid, dtype=np.float64)
    top = vmax if vmax is not None else (g.max() if g.max() > 0 else 1.0)
    img = np.clip(np.round(255.0 * g / top), 0, 255).astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())


def ascii_preview(obs: Observation) -> str:
    """Text-art occupancy: '#' goal, 'o' other objects, '.' empty (row 0 at the bottom)."""
    rows = []
    for r in range(obs.shape[0] - 1, -1, -1):
        line = []
        for c in range(obs.shape[1]):
            if obs.goal_mask[r, c]:
                line.append("#")
            elif obs.occupied[r, c]:
                line.append("o")
            else:
                line.append(".")
        rows.append("".join(line))
    return "\n".join(rows)
