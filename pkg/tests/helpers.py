"""Scene builders and independent oracles shared by the test modules.

The oracles deliberately avoid the package's own geometry and raster code:
polygons go through shapely, discs through a direct distance test.
"""
import math

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import Point, Polygon, box

from pushgrasp.config import WorldConfig
from pushgrasp.world import ObjectSpec, Pose2D, Scene, SceneObject

CELL = 0.01


def block(oid, cx, cy, w=3.0, l=3.0, h=0.03, color=None, theta=0.0):
    """Rectangle with center and sides given in grid cells."""
    spec = ObjectSpec(oid, "rect", (w * CELL, l * CELL), h, oid % 8 if color is None else color)
    return SceneObject(spec, Pose2D(cx * CELL, cy * CELL, theta))


def disc(oid, cx, cy, r=1.5, h=0.03, color=None):
    spec = ObjectSpec(oid, "disc", (r * CELL,), h, oid % 8 if color is None else color)
    return SceneObject(spec, Pose2D(cx * CELL, cy * CELL))


def scene_of(*objs, goal=0):
    return Scene(tuple(objs), goal_id=goal)


# ---------------------------------------------------------------------------
# shapes

def direction(k):
    a = k * math.pi / 8
    return math.cos(a), math.sin(a)


def shape_of(obj):
    """shapely geometry of an object's footprint built from its spec and pose."""
    s, p = obj.spec, obj.pose
    if s.shape == "disc":
        return Point(p.x, p.y).buffer(s.dims[0], quad_segs=128)
    if s.shape == "rect":
        w, l = s.dims
        local = Polygon([(-w / 2, -l / 2), (w / 2, -l / 2), (w / 2, l / 2), (-w / 2, l / 2)])
    else:
        b, h = s.dims
        local = Polygon([(-b / 2, -h / 3), (b / 2, -h / 3), (0.0, 2 * h / 3)])
    rot = affinity.rotate(local, p.theta, origin=(0, 0), use_radians=True)
    return affinity.translate(rot, p.x, p.y)


def covers_points(obj, xs, ys):
    """Closed point-in-footprint test on arrays of points."""
    s, p = obj.spec, obj.pose
    if s.shape == "disc":
        return (xs - p.x) ** 2 + (ys - p.y) ** 2 <= s.dims[0] ** 2
    return shapely.intersects_xy(shape_of(obj), xs, ys)


def oriented_rect(cx, cy, along, across, ax):
    ux, uy = ax
    px, py = -uy, ux
    pts = [(cx + sa * along / 2 * ux + sb * across / 2 * px,
            cy + sa * along / 2 * uy + sb * across / 2 * py)
           for sa, sb in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    return Polygon(pts)


def extent_along(obj, ax):
    if obj.spec.shape == "disc":
        return 2 * obj.spec.dims[0]
    xy = np.asarray(shape_of(obj).exterior.coords)
    proj = xy @ np.asarray(ax)
    return proj.max() - proj.min()


# ---------------------------------------------------------------------------
# grasp oracle

def grasp_oracle(scene, center, k, world=None):
    """Object id lifted by a grasp, decided on a supersampled point lattice."""
    world = world or WorldConfig()
    c = world.cell
    opening = world.gripper_opening_cells * c
    jl = world.jaw_length_cells * c
    jt = world.jaw_thickness_cells * c
    ax = direction(k)
    off = opening / 2 + jt / 2
    cx, cy = center
    jaws = [oriented_rect(cx + s * off * ax[0], cy + s * off * ax[1], jt, jl, ax) for s in (-1, 1)]
    between = oriented_rect(cx, cy, opening, jl, ax)
    x0, y0, x1, y1 = scene.workspace.bounds
    for j in jaws:
        bx0, by0, bx1, by1 = j.bounds
        if bx0 < x0 - 1e-9 or by0 < y0 - 1e-9 or bx1 > x1 + 1e-9 or by1 > y1 + 1e-9:
            return None
    step = c / world.grasp_supersample
    gx0, gy0, gx1, gy1 = shapely.union_all(jaws + [between]).bounds
    cols = np.arange(max(int((gx0 - x0) / step) - 2, 0), int((gx1 - x0) / step) + 3)
    rows = np.arange(max(int((gy0 - y0) / step) - 2, 0), int((gy1 - y0) / step) + 3)
    xs, ys = np.meshgrid(x0 + (cols + 0.5) * step, y0 + (rows + 0.5) * step)
    xs, ys = xs.ravel(), ys.ravel()
    in_jaw = shapely.intersects_xy(jaws[0], xs, ys) | shapely.intersects_xy(jaws[1], xs, ys)
    in_between = shapely.intersects_xy(between, xs, ys)
    best, best_n = None, 0
    for obj in scene.objects:
        m = covers_points(obj, xs, ys)
        if (m & in_jaw).any():
            return None
        n = int((m & in_between).sum())
        if n > best_n:
            best, best_n = obj, n
    if best is None or extent_along(best, ax) > opening:
        return None
    return best.object_id


# ---------------------------------------------------------------------------
# push oracle

def _overlap(a, b):
    return a.intersection(b).area > 1e-10


def sweep_push(scene, start, k, world=None, h=0.001):
    """Advance the pusher in steps of ``h``; anything it (or a moved object)
    overlaps moves with it by the same step.  A step that would carry an
    object past the workspace edge stops the sweep.  Returns per-object
    displacement along the push direction."""
    world = world or WorldConfig()
    c = world.cell
    r_p = world.pusher_radius_cells * c
    length = world.push_length_cells * c
    u = np.array(direction(k))
    x0, y0, x1, y1 = scene.workspace.bounds
    pos = np.array([min(max(start[0], x0), x1), min(max(start[1], y0), y1)])
    shapes = [shape_of(o) for o in scene.objects]
    disp = np.zeros(len(shapes))
    walls = box(x0, y0, x1, y1).buffer(1e-9, join_style="mitre")
    travelled = 0.0
    while travelled < length - 1e-12:
        d = min(h, length - travelled)
        pusher = Point(*(pos + d * u)).buffer(r_p, quad_segs=64)
        queue = [i for i, s in enumerate(shapes) if _overlap(pusher, s)]
        moving = set()
        while queue:
            i = queue.pop()
            if i in moving:
                continue
            moving.add(i)
            moved = affinity.translate(shapes[i], *(d * u))
            queue += [j for j, s in enumerate(shapes) if j not in moving and _overlap(moved, s)]
        moved_shapes = {i: affinity.translate(shapes[i], *(d * u)) for i in moving}
        if any(not walls.covers(s) for s in moved_shapes.values()):
            break
        for i, s in moved_shapes.items():
            shapes[i] = s
            disp[i] += d
        pos = pos + d * u
        travelled += d
    return disp


def pose_shift(before, after):
    return np.array([math.hypot(a.pose.x - b.pose.x, a.pose.y - b.pose.y)
                     for b, a in zip(before.objects, after.objects)])


# ---------------------------------------------------------------------------
# gradient oracle

def fd_gradient_check(params, planes, pixel, target, n_params=50, seed=0, h=1e-4):
    """Max relative error between analytic gradients and central differences
    of the single-pixel loss over ``n_params`` randomly chosen parameters."""
    from pushgrasp import qfunc
    _, _, grad = qfunc.pixel_loss_and_grad(params, planes, pixel, target)
    idx = np.random.default_rng(seed).choice(params.theta.size, n_params, replace=False)
    worst = 0.0
    for i in idx:
        old = params.theta[i]
        params.theta[i] = old + h
        lp = qfunc.pixel_loss_and_grad(params, planes, pixel, target)[0]
        params.theta[i] = old - h
        lm = qfunc.pixel_loss_and_grad(params, planes, pixel, target)[0]
        params.theta[i] = old
        num = (lp - lm) / (2 * h)
        scale = max(abs(num), abs(grad[i]), 1e-8)
        worst = max(worst, abs(num - grad[i]) / scale)
    return worst


# ---------------------------------------------------------------------------
# relabeling fixtures

def small_config(grid=32, channels=(8, 8), dilations=(1, 2)):
    """A reduced world and net so that net evaluations stay cheap in tests."""
    from pushgrasp.config import Config
    cfg = Config()
    cfg.world.grid_size = grid
    cfg.world.workspace_size = grid * CELL
    cfg.qfunc.channels = channels
    cfg.qfunc.dilations = dilations
    return cfg


def crowded_scene(rng, grid):
    """A victim block hemmed in by two or three neighbours at small random
    gaps, and a goal disc placed away from the cluster."""
    ws_cells = grid
    while True:
        vc = ws_cells / 2 + rng.uniform(-2, 2, 2)
        objs = [block(1, *vc, *rng.uniform(2.0, 2.8, 2), theta=rng.uniform(0, math.pi))]
        base = rng.uniform(0, 2 * math.pi)
        n_nb = int(rng.integers(2, 4))
        for j in range(n_nb):
            a = base + 2 * math.pi * j / n_nb + rng.uniform(-0.4, 0.4)
            d = 3.2 + rng.uniform(0.5, 1.5)
            objs.append(block(2 + j, vc[0] + d * math.cos(a), vc[1] + d * math.sin(a),
                              rng.uniform(2.5, 3.2), rng.uniform(3.5, 4.8), theta=a))
        corner = rng.integers(0, 2, 2) * (ws_cells - 5) + 2.5
        objs.append(disc(0, *corner, r=1.2))
        shapes = [shape_of(o) for o in objs]
        inside = all(box(0, 0, ws_cells * CELL, ws_cells * CELL).contains(sh) for sh in shapes)
        apart = all(not a.intersects(b) for i, a in enumerate(shapes) for b in shapes[i + 1:])
        if inside and apart:
            from pushgrasp.world import Workspace
            return Scene(tuple(objs), Workspace(size=ws_cells * CELL), 0)


def relabel_config():
    """Small net whose receptive field still reaches a victim's neighbours."""
    return small_config(20, (4, 4), (2, 4))


def wrong_catch_episode(rng, cfg, grasp_q, max_pushes=3):
    """Pushes around a crowded non-goal victim, then a grasp that lifts a
    non-goal object.  Most pushes clear a neighbour away from the victim,
    the rest are random.  Returns the episode's transitions (pushes carry
    rewards computed the way the agent computes them), or None if no wrong
    catch is available."""
    from pushgrasp import rewards
    from pushgrasp.agent import execute
    from pushgrasp.evalkit import find_grasp
    from pushgrasp.percept import render
    from pushgrasp.replay import Action, Transition

    n = cfg.world.grid_size
    scene = crowded_scene(rng, n)
    goal, victim = 0, 1
    out = []
    for step in range(int(rng.integers(0, max_pushes + 1))):
        o = scene.get(victim)
        if rng.random() < 0.7:
            nbs = [p for p in scene.objects if p.object_id not in (goal, victim)]
            nb = nbs[int(rng.integers(len(nbs)))]
            ang = math.atan2(nb.pose.y - o.pose.y, nb.pose.x - o.pose.x)
            k = int(round(ang / (math.pi / 8))) % 16
            x, y = nb.pose.x / CELL, nb.pose.y / CELL
        else:
            k = int(rng.integers(16))
            x = o.pose.x / CELL + rng.integers(-6, 7)
            y = o.pose.y / CELL + rng.integers(-6, 7)
        a = Action("push", k, int(np.clip(y, 0, n - 1)), int(np.clip(x, 0, n - 1)))
        nxt = execute(scene, a, cfg).next_scene
        inp = rewards.push_inputs(render(scene, cfg.world, goal), render(nxt, cfg.world, goal),
                                  grasp_q(scene, goal), grasp_q(nxt, goal), cfg.rewards, cfg.percept)
        out.append(Transition(scene, a, rewards.push_reward(inp), nxt, goal, 0, step, "push",
                              next_goal_id=goal, inputs=inp))
        scene = nxt
    for oid in [victim] + [i for i in scene.ids() if i not in (goal, victim)]:
        px = find_grasp(scene, cfg, oid)
        if px is not None:
            a = Action("grasp", *px)
            res = execute(scene, a, cfg)
            assert res.grasped_id == oid
            out.append(Transition(scene, a, 0.0, res.next_scene, goal, 0, len(out), "grasp",
                                  grasped_id=oid, next_goal_id=goal))
            return out
    return None


def replay_push_rewards(initial, actions, new_goal, cfg, grasp_net):
    """Re-execute ``actions`` from ``initial`` and score each push for
    ``new_goal`` from scratch: fresh renders, fresh net evaluations and the
    reward rule written out literally."""
    from pushgrasp import qfunc
    from pushgrasp.agent import execute
    from pushgrasp.percept import encode, neighborhood_change, render, rotate_stack

    def q_in_mask(scene):
        obs = render(scene, cfg.world, new_goal)
        maps = qfunc.forward(grasp_net, rotate_stack(encode(obs, cfg.world, cfg.percept))).values
        return float(maps[:, obs.goal_mask].max())

    rw = cfg.rewards
    scene = initial
    out = []
    for a in actions:
        nxt = execute(scene, a, cfg).next_scene
        changed, o_dec = neighborhood_change(render(scene, cfg.world, new_goal),
                                             render(nxt, cfg.world, new_goal),
                                             cfg.percept.ring_radius, cfg.percept.depth_tolerance)
        detected = changed >= rw.tau_c and o_dec > rw.tau_o
        gain = q_in_mask(nxt) - q_in_mask(scene)
        out.append(-0.5 if not detected else (0.5 if gain > rw.tau_q else 0.0))
        scene = nxt
    return out
