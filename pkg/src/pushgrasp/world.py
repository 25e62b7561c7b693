"""Deterministic 2D quasi-static tabletop.

Scenes are immutable values; every step returns a new Scene.  Pushes are
translation-only: the pusher (a disc) and every object it reaches travel
along the push axis, contacts propagate through chains, and a chain that
meets the workspace wall stalls the whole push.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from . import kernels
from .config import ShapePoolConfig, WorldConfig
from .errors import PlacementExhausted

N_ROTATIONS = 16
SHAPES = ("rect", "disc", "triangle")


@dataclass(frozen=True)
class ObjectSpec:
    object_id: int
    shape: str
    dims: tuple  # rect (w, l); disc (r,); triangle (base, height)
    height: float
    color: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        expected = 1 if self.shape == "disc" else 2
        if len(self.dims) != expected or any(d <= 0 for d in self.dims):
            raise ValueError(f"bad dims {self.dims!r} for {self.shape}")
        if self.height <= 0:
            raise ValueError("height must be positive")


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", self.theta % (2 * math.pi))


@dataclass(frozen=True)
class Workspace:
    x0: float = 0.0
    y0: float = 0.0
    size: float = 0.64

    @property
    def bounds(self):
        return (self.x0, self.y0, self.x0 + self.size, self.y0 + self.size)


@dataclass(frozen=True)
class SceneObject:
    spec: ObjectSpec
    pose: Pose2D

    @property
    def object_id(self) -> int:
        return self.spec.object_id

    def footprint(self) -> geo.Footprint:
        return footprint(self.spec, self.pose)


@dataclass(frozen=True)
class Scene:
    objects: tuple
    workspace: Workspace = field(default_factory=Workspace)
    goal_id: int | None = None

    def ids(self):
        return [o.object_id for o in self.objects]

    def get(self, object_id) -> SceneObject | None:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        return None

    def has(self, object_id) -> bool:
        return self.get(object_id) is not None

    def with_goal(self, goal_id) -> "Scene":
        return replace(self, goal_id=goal_id)

    def without(self, object_id) -> "Scene":
        objs = tuple(o for o in self.objects if o.object_id != object_id)
        goal = None if self.goal_id == object_id else self.goal_id
        return Scene(objs, self.workspace, goal)

    def __len__(self):
        return len(self.objects)


@dataclass(frozen=True)
class PushCommand:
    start: tuple
    k: int
    length: float


@dataclass(frozen=True)
class GraspCommand:
    center: tuple
    k: int
    opening: float
    jaw_length: float
    jaw_thickness: float


@dataclass(frozen=True)
class StepOutcome:
    kind: str  # "pushed" | "grasp-success" | "grasp-fail"
    grasped_id: int | None
    moved_ids: frozenset
    next_scene: Scene


def angle_of(k: int) -> float:
    return (k % N_ROTATIONS) * (2 * math.pi / N_ROTATIONS)


def footprint(spec: ObjectSpec, pose: Pose2D) -> geo.Footprint:
    center = np.array([pose.x, pose.y], dtype=np.float64)
    if spec.shape == "disc":
        return geo.Disc(center, float(spec.dims[0]))
    axis = geo.unit(pose.theta)
    if spec.shape == "rect":
        w, l = spec.dims
        return geo.rect_polygon(center, w / 2.0, l / 2.0, axis)
    base, height = spec.dims
    local = np.array([[-base / 2, -height / 3], [base / 2, -height / 3], [0.0, 2 * height / 3]])
    rot = np.array([[axis[0], -axis[1]], [axis[1], axis[0]]])
    return geo.Polygon(local @ rot.T + center)


def raster(fp: geo.Footprint, x0, y0, step, nrows, ncols) -> np.ndarray:
    """Boolean mask of lattice cells whose center lies in ``fp``."""
    if isinstance(fp, geo.Disc):
        out = kernels.raster_disc(float(fp.center[0]), float(fp.center[1]), fp.radius,
                                  x0, y0, step, nrows, ncols)
    else:
        out = kernels.raster_polygon(fp.verts, x0, y0, step, nrows, ncols)
    return out.view(bool)


# ---------------------------------------------------------------------------
# scene generation

def _sample_spec(rng: np.random.Generator, object_id: int, pool: ShapePoolConfig) -> ObjectSpec:
    kind = pool.kinds[int(rng.integers(len(pool.kinds)))]
    if kind == "rect":
        w = rng.uniform(pool.rect_side_min, pool.rect_side_max)
        l = rng.uniform(w, max(w, pool.rect_length_max))
        dims = (float(w), float(l))
    elif kind == "disc":
        dims = (float(rng.uniform(pool.disc_radius_min, pool.disc_radius_max)),)
    else:
        b = rng.uniform(pool.triangle_base_min, pool.triangle_base_max)
        h = rng.uniform(pool.triangle_base_min, pool.triangle_base_max)
        dims = (float(b), float(h))
    height = float(rng.uniform(pool.height_min, pool.height_max))
    color = int(rng.integers(pool.n_colors))
    return ObjectSpec(object_id, kind, dims, height, color)


def generate_random_scene(n_objects: int, seed, pool: ShapePoolConfig | None = None,
                          world: WorldConfig | None = None,
                          drop_extent: float = 1.0) -> Scene:
    """Drop ``n_objects`` random objects without overlap.

    ``drop_extent`` is the side of the central drop square as a fraction of
    the workspace; smaller values produce denser clutter.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    pool = pool or ShapePoolConfig()
    world = world or WorldConfig()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ws = Workspace(0.0, 0.0, world.workspace_size)
    bounds = ws.bounds
    half = 0.5 * ws.size * drop_extent
    cx = cy = 0.5 * ws.size
    placed: list[SceneObject] = []
    fps: list[geo.Footprint] = []
    for oid in range(n_objects):
        spec = _sample_spec(rng, oid, pool)
        for _ in range(world.max_attempts):
            pose = Pose2D(float(rng.uniform(cx - half, cx + half)),
                          float(rng.uniform(cy - half, cy + half)),
                          float(rng.uniform(0.0, 2 * math.pi)))
            fp = footprint(spec, pose)
            if not geo.inside_bounds(fp, bounds, tol=0.0):
                continue
            if any(geo.overlaps(fp, other) for other in fps):
                continue
            placed.append(SceneObject(spec, pose))
            fps.append(fp)
            break
        else:
            raise PlacementExhausted(
                f"could not place object {oid} of {n_objects} after {world.max_attempts} attempts")
    goal = int(rng.integers(n_objects))
    return Scene(tuple(placed), ws, goal)


# ---------------------------------------------------------------------------
# push

def push_command(world: WorldConfig, start, k: int) -> PushCommand:
    return PushCommand((float(start[0]), float(start[1])), int(k) % N_ROTATIONS,
                       world.push_length_cells * world.cell)


def grasp_command(world: WorldConfig, center, k: int) -> GraspCommand:
    c = world.cell
    return GraspCommand((float(center[0]), float(center[1])), int(k) % N_ROTATIONS,
                        world.gripper_opening_cells * c, world.jaw_length_cells * c,
                        world.jaw_thickness_cells * c)


def push_contact_costs(scene: Scene, cmd: PushCommand, pusher_radius: float):
    """Pusher travel at which each object starts moving (inf if never).

    Costs are shortest paths over the contact graph: an object starts moving
    when the pusher reaches it directly or when an already-moving object
    reaches it, whichever happens first.
    """
    u = geo.unit(angle_of(cmd.k))
    x0, y0, x1, y1 = scene.workspace.bounds
    start = np.array([min(max(cmd.start[0], x0), x1), min(max(cmd.start[1], y0), y1)])
    pusher = geo.Disc(start, pusher_radius)
    fps = [o.footprint() for o in scene.objects]
    n = len(fps)
    cost = np.full(n, math.inf)
    for i, fp in enumerate(fps):
        iv = geo.translation_interval(pusher, fp, u)
        if iv is not None and iv[1] > 0.0:
            cost[i] = iv[0]
    edge = np.full((n, n), math.inf)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            iv = geo.translation_interval(fps[i], fps[j], u)
            if iv is not None and iv[1] > 0.0:
                edge[i, j] = max(iv[0], 0.0)
    # order by projection along the push axis, then relax to a fixed point
    order = sorted(range(n), key=lambda i: (float(np.dot(_centroid(fps[i]), u)), i))
    for _ in range(n):
        changed = False
        for i in order:
            if not math.isfinite(cost[i]):
                continue
            for j in range(n):
                c = cost[i] + edge[i, j]
                if c < cost[j]:
                    cost[j] = c
                    changed = True
        if not changed:
            break
    return cost, u, start, fps


def _centroid(fp):
    if isinstance(fp, geo.Disc):
        return fp.center
    return fp.verts.mean(axis=0)


def push_displacements(scene: Scene, cmd: PushCommand, pusher_radius: float):
    """Per-object travel along the push axis, and the pusher's achieved travel."""
    cost, u, start, fps = push_contact_costs(scene, cmd, pusher_radius)
    travel = cmd.length
    bounds = scene.workspace.bounds
    for i, fp in enumerate(fps):
        if cost[i] < cmd.length:
            travel = min(travel, cost[i] + geo.travel_to_bounds(fp, u, bounds))
    disp = np.where(np.isfinite(cost), np.maximum(0.0, travel - cost), 0.0)
    return disp, u, travel


def apply_push(scene: Scene, cmd: PushCommand, world: WorldConfig | None = None) -> StepOutcome:
    world = world or WorldConfig()
    disp, u, _ = push_displacements(scene, cmd, world.pusher_radius_cells * world.cell)
    objs = []
    moved = set()
    for obj, d in zip(scene.objects, disp):
        if d > 0.0:
            pose = Pose2D(obj.pose.x + d * u[0], obj.pose.y + d * u[1], obj.pose.theta)
            obj = SceneObject(obj.spec, pose)
            if d > world.move_tolerance:
                moved.add(obj.object_id)
        objs.append(obj)
    return StepOutcome("pushed", None, frozenset(moved), Scene(tuple(objs), scene.workspace, scene.goal_id))


# ---------------------------------------------------------------------------
# grasp

@dataclass(frozen=True)
class GraspGeometry:
    """Sample lattice and per-sample labels for one grasp evaluation."""
    jaw_hits: dict            # object_id -> bool
    between_counts: dict      # object_id -> int
    jaws_in_bounds: bool


def gripper_regions(cmd: GraspCommand):
    axis = geo.unit(angle_of(cmd.k))
    c = np.asarray(cmd.center, dtype=np.float64)
    off = cmd.opening / 2.0 + cmd.jaw_thickness / 2.0
    jaws = (geo.rect_polygon(c - off * axis, cmd.jaw_thickness / 2.0, cmd.jaw_length / 2.0, axis),
            geo.rect_polygon(c + off * axis, cmd.jaw_thickness / 2.0, cmd.jaw_length / 2.0, axis))
    between = geo.rect_polygon(c, cmd.opening / 2.0, cmd.jaw_length / 2.0, axis)
    return jaws, between, axis


def grasp_geometry(scene: Scene, cmd: GraspCommand, world: WorldConfig) -> GraspGeometry:
    jaws, between, _ = gripper_regions(cmd)
    bounds = scene.workspace.bounds
    in_bounds = all(geo.inside_bounds(j, bounds) for j in jaws)
    ss = max(1, int(world.grasp_supersample))
    step = world.cell / ss
    n = int(round(scene.workspace.size / step))
    # evaluate only the lattice window under the gripper
    pts = np.vstack([jaws[0].verts, jaws[1].verts])
    c0 = max(int(math.floor((pts[:, 0].min() - scene.workspace.x0) / step)) - 1, 0)
    c1 = min(int(math.ceil((pts[:, 0].max() - scene.workspace.x0) / step)) + 1, n)
    r0 = max(int(math.floor((pts[:, 1].min() - scene.workspace.y0) / step)) - 1, 0)
    r1 = min(int(math.ceil((pts[:, 1].max() - scene.workspace.y0) / step)) + 1, n)
    hits = {o.object_id: False for o in scene.objects}
    counts = {o.object_id: 0 for o in scene.objects}
    if c0 >= c1 or r0 >= r1:
        return GraspGeometry(hits, counts, in_bounds)
    x0 = scene.workspace.x0 + c0 * step
    y0 = scene.workspace.y0 + r0 * step
    nr, nc = r1 - r0, c1 - c0
    jaw_mask = raster(jaws[0], x0, y0, step, nr, nc) | raster(jaws[1], x0, y0, step, nr, nc)
    between_mask = raster(between, x0, y0, step, nr, nc)
    for obj in scene.objects:
        m = raster(obj.footprint(), x0, y0, step, nr, nc)
        hits[obj.object_id] = bool((m & jaw_mask).any())
        counts[obj.object_id] = int((m & between_mask).sum())
    return GraspGeometry(hits, counts, in_bounds)


def grasp_target(scene: Scene, cmd: GraspCommand, world: WorldConfig | None = None):
    """Object id a grasp would lift, or None if it fails."""
    world = world or WorldConfig()
    g = grasp_geometry(scene, cmd, world)
    if not g.jaws_in_bounds or any(g.jaw_hits.values()):
        return None
    best, best_count = None, 0
    for obj in scene.objects:
        cnt = g.between_counts[obj.object_id]
        if cnt > best_count:
            best, best_count = obj, cnt
    if best is None:
        return None
    axis = geo.unit(angle_of(cmd.k))
    if best.footprint().extent_along(axis) > cmd.opening:
        return None
    return best.object_id


def apply_grasp(scene: Scene, cmd: GraspCommand, world: WorldConfig | None = None) -> StepOutcome:
    target = grasp_target(scene, cmd, world)
    if target is None:
        return StepOutcome("grasp-fail", None, frozenset(), scene)
    return StepOutcome("grasp-success", target, frozenset(), scene.without(target))


def scene_overlaps(scene: Scene):
    """Pairs of object ids whose interiors overlap."""
    fps = [(o.object_id, o.footprint()) for o in scene.objects]
    out = []
    for i in range(len(fps)):
        for j in range(i + 1, len(fps)):
            if geo.overlaps(fps[i][1], fps[j][1]):
                out.append((fps[i][0], fps[j][0]))
    return out
