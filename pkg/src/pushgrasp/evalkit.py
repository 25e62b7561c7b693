"""Evaluation protocols and per-case reports.

A run repeatedly asks a policy for actions on one scene until the goal is
grasped (completed), the goal grasp fails ``max_consecutive_failures`` times
in a row, or the motion cap is hit.  Wrong-object catches count as failed
goal grasps and remove the caught object.

Report aggregation: completion is the share of runs completed; grasp success
and motion number are first computed per completed run and then averaged
over completed runs.  The average row is the plain mean of the case rows.
"""
from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import geometry as geo
from . import percept
from .agent import QAgent, execute, pixel_to_world
from .config import Config, ShapePoolConfig
from .replay import Action
from .scenefile import parse_scene
from .world import Pose2D, Scene, SceneObject, generate_random_scene, grasp_command, grasp_target

CHALLENGING_PACKAGE = "pushgrasp.data.challenging"


class Policy(Protocol):
    def act(self, scene: Scene, goal_id, mode: str, pushes: int, rng: np.random.Generator) -> Action:
        ...


@dataclass
class RunResult:
    completed: bool
    goal_grasp_attempts: int
    goal_grasp_successes: int
    total_motions: int
    actions: list = field(default_factory=list)   # (kind, outcome) tuples
    capped: bool = False
    n_objects: int = 0

    @property
    def grasp_success(self) -> float:
        if not self.goal_grasp_attempts:
            return 0.0
        return 100.0 * self.goal_grasp_successes / self.goal_grasp_attempts

    @property
    def efficiency(self) -> float:
        return self.n_objects / self.total_motions if self.total_motions else 0.0


@dataclass
class CaseResult:
    name: str
    runs: list

    @property
    def completed_runs(self):
        return [r for r in self.runs if r.completed]

    @property
    def completion(self) -> float:
        return 100.0 * len(self.completed_runs) / len(self.runs) if self.runs else 0.0

    @property
    def grasp_success(self) -> float | None:
        done = self.completed_runs
        return float(np.mean([r.grasp_success for r in done])) if done else None

    @property
    def motion_number(self) -> float | None:
        done = self.completed_runs
        return float(np.mean([r.total_motions for r in done])) if done else None

    @property
    def efficiency(self) -> float | None:
        done = self.completed_runs
        return float(np.mean([r.efficiency for r in done])) if done else None

    @property
    def capped(self) -> int:
        return sum(r.capped for r in self.runs)


@dataclass
class SuiteReport:
    suite: str
    mode: str
    cases: list

    def _mean(self, attr):
        vals = [getattr(c, attr) for c in self.cases]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def completion(self) -> float:
        return self._mean("completion")

    @property
    def grasp_success(self) -> float | None:
        return self._mean("grasp_success")

    @property
    def motion_number(self) -> float | None:
        return self._mean("motion_number")

    @property
    def efficiency(self) -> float | None:
        return self._mean("efficiency")


# ---------------------------------------------------------------------------
# runs

def jitter_scene(scene: Scene, rng: np.random.Generator, max_shift: float) -> Scene:
    """Translate the whole scene by a uniform offset, shrunk to stay in bounds."""
    if max_shift <= 0.0 or not len(scene):
        return scene
    d = rng.uniform(-max_shift, max_shift, 2)
    lo = np.full(2, np.inf)
    hi = np.full(2, -np.inf)
    for o in scene.objects:
        b = o.footprint().bounds()
        lo = np.minimum(lo, b[:2])
        hi = np.maximum(hi, b[2:])
    x0, y0, x1, y1 = scene.workspace.bounds
    d[0] = min(max(d[0], x0 - lo[0]), x1 - hi[0])
    d[1] = min(max(d[1], y0 - lo[1]), y1 - hi[1])
    objs = tuple(SceneObject(o.spec, Pose2D(o.pose.x + d[0], o.pose.y + d[1], o.pose.theta))
                 for o in scene.objects)
    return Scene(objs, scene.workspace, scene.goal_id)


def run_once(scene: Scene, policy: Policy, cfg: Config, rng: np.random.Generator,
             mode: str = "goal") -> RunResult:
    ev = cfg.eval
    goal = scene.goal_id
    n0 = len(scene)
    attempts = successes = motions = fails = pushes = 0
    actions = []
    while True:
        if motions >= ev.motion_cap:
            return RunResult(False, attempts, successes, motions, actions, True, n0)
        a = policy.act(scene, goal if mode == "goal" else None, mode, pushes, rng)
        out = execute(scene, a, cfg)
        motions += 1
        scene = out.next_scene
        if a.kind == "push":
            pushes += 1
            actions.append(("push", "pushed"))
            continue
        pushes = 0
        attempts += 1
        if mode == "goal":
            ok = out.grasped_id is not None and out.grasped_id == goal
        else:
            ok = out.grasped_id is not None
        actions.append(("grasp", "success" if ok else ("wrong" if out.grasped_id is not None else "fail")))
        if ok:
            successes += 1
            fails = 0
            if mode == "goal" or not len(scene):
                return RunResult(True, attempts, successes, motions, actions, False, n0)
        else:
            fails += 1
            if fails >= ev.max_consecutive_failures:
                return RunResult(False, attempts, successes, motions, actions, False, n0)


def case_seed(seed: int, name: str, run: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), int(run)])


def run_test(cases: Sequence, policy: Policy, cfg: Config, n_runs: int | None = None,
             mode: str = "goal", suite: str = "custom") -> SuiteReport:
    """Evaluate ``cases`` (pairs of name and Scene) with ``n_runs`` runs each."""
    n_runs = cfg.eval.n_runs if n_runs is None else n_runs
    shift = cfg.eval.jitter_cells * cfg.world.cell
    results = []
    for name, scene in cases:
        runs = []
        for j in range(n_runs):
            rng = np.random.default_rng(case_seed(cfg.eval.seed, name, j))
            if hasattr(policy, "reset"):
                policy.reset()
            runs.append(run_once(jitter_scene(scene, rng, shift), policy, cfg, rng, mode))
        results.append(CaseResult(name, runs))
    return SuiteReport(suite, mode, results)


def goal_agnostic_eval(cases: Sequence, policy: Policy, cfg: Config, n_runs: int | None = None):
    report = run_test(cases, policy, cfg, n_runs, mode="agnostic", suite="goal-agnostic")
    return report, report.efficiency


# ---------------------------------------------------------------------------
# suites

def build_challenging_suite() -> list:
    files = sorted(p for p in resources.files(CHALLENGING_PACKAGE).iterdir()
                   if p.name.endswith(".scene"))
    return [(p.name[:-len(".scene")], parse_scene(p.read_text())) for p in files]


def build_random_suite(cfg: Config) -> list:
    ev = cfg.eval
    out = []
    for i in range(ev.random_suite_cases):
        rng = np.random.default_rng(np.random.SeedSequence([ev.seed, 101, i]))
        out.append((f"random-{i:02d}", generate_random_scene(
            ev.random_suite_objects, rng, cfg.shapes, cfg.world, ev.random_drop_extent)))
    return out


def build_height_suite(cfg: Config) -> list:
    """Random clutter with object heights spanning the full allowed range."""
    ev = cfg.eval
    pool = ShapePoolConfig(**{**cfg.shapes.__dict__, "height_min": 0.01,
                              "height_max": cfg.world.height_max})
    out = []
    for i in range(ev.height_suite_cases):
        rng = np.random.default_rng(np.random.SeedSequence([ev.seed, 202, i]))
        out.append((f"height-{i:02d}", generate_random_scene(
            ev.random_suite_objects, rng, pool, cfg.world, ev.random_drop_extent)))
    return out


def build_suite(name: str, cfg: Config) -> list:
    if name == "challenging":
        return build_challenging_suite()
    if name in ("random", "goal-agnostic"):
        return build_random_suite(cfg)
    if name == "height":
        return build_height_suite(cfg)
    raise ValueError(f"unknown suite {name!r}")


# ---------------------------------------------------------------------------
# reports

def fmt_pct(v) -> str:
    if v is None:
        return "-"
    return "100" if v == 100.0 else f"{v:.1f}"


def fmt_motion(v) -> str:
    return "-" if v is None else f"{v:.2f}"


def cell(completion, grasp, motion) -> str:
    return f"{fmt_pct(completion)} / {fmt_pct(grasp)} / {fmt_motion(motion)}"


REPORT_FIELDS = ("case", "runs", "completed", "capped", "completion", "grasp_success",
                 "motion_number", "efficiency")


def report_csv(report: SuiteReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)

    def num(v):
        return "" if v is None else f"{v:.6f}"

    for c in report.cases:
        w.writerow([c.name, len(c.runs), len(c.completed_runs), c.capped, num(c.completion),
                    num(c.grasp_success), num(c.motion_number), num(c.efficiency)])
    w.writerow(["average", sum(len(c.runs) for c in report.cases),
                sum(len(c.completed_runs) for c in report.cases),
                sum(c.capped for c in report.cases), num(report.completion),
                num(report.grasp_success), num(report.motion_number), num(report.efficiency)])
    return buf.getvalue()


def report_table(report: SuiteReport) -> str:
    width = max([len(c.name) for c in report.cases] + [len("average"), len("case")])
    lines = [f"suite: {report.suite}  mode: {report.mode}",
             "cells: Completion / Grasp Success / Motion Number",
             "grasp success and motion number are averaged over completed runs",
             f"{'case':<{width}}  result"]
    for c in report.cases:
        extra = f"  (capped {c.capped})" if c.capped else ""
        lines.append(f"{c.name:<{width}}  {cell(c.completion, c.grasp_success, c.motion_number)}{extra}")
    lines.append(f"{'average':<{width}}  "
                 f"{cell(report.completion, report.grasp_success, report.motion_number)}")
    if report.mode == "agnostic" and report.efficiency is not None:
        lines.append(f"action efficiency: {report.efficiency:.3f}")
    return "\n".join(lines) + "\n"


def emit_report(report: SuiteReport, path) -> None:
    """Write ``<path>.csv`` and ``<path>.txt``."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.with_suffix(".csv").write_text(report_csv(report))
    p.with_suffix(".txt").write_text(report_table(report))


# ---------------------------------------------------------------------------
# policies

class QPolicy:
    """Greedy gated policy over trained nets."""

    def __init__(self, agent: QAgent, q_threshold: float | None = None):
        self.agent = agent
        self.q_threshold = agent.cfg.agent.q_threshold if q_threshold is None else q_threshold

    def act(self, scene, goal_id, mode, pushes, rng):
        v = self.agent.view(scene, goal_id, mode)
        force = pushes >= self.agent.cfg.agent.max_pushes
        return self.agent.decide(v, mode, 0.0, rng, self.q_threshold, force).action


def find_grasp(scene: Scene, cfg: Config, target=None, mode: str = "goal"):
    """First (k, row, col) whose grasp lifts ``target`` (any object in
    agnostic mode), scanning rotations then cells; None if none works."""
    obs = percept.render(scene, cfg.world, target, agnostic=(mode == "agnostic"))
    rows, cols = np.nonzero(obs.goal_mask)
    for k in range(percept.N_ROTATIONS):
        for r, c in zip(rows, cols):
            xy = pixel_to_world(scene, cfg.world.grid_size, int(r), int(c))
            hit = grasp_target(scene, grasp_command(cfg.world, xy, k), cfg.world)
            if hit is not None and (mode == "agnostic" or hit == target):
                return (k, int(r), int(c))
    return None


class HeuristicPolicy:
    """Geometric baseline: grasp when a clean goal grasp exists, otherwise
    push the neighbor that most decreases the goal's ring occupancy."""

    def __init__(self, cfg: Config):
        self.cfg = cfg

    def _push_candidates(self, scene: Scene, goal_id):
        cfg = self.cfg
        goal = scene.get(goal_id)
        gc = _centroid(goal.footprint())
        ring_r = cfg.percept.ring_radius * cfg.world.cell
        out = []
        for o in scene.objects:
            if o.object_id == goal_id:
                continue
            oc = _centroid(o.footprint())
            d = oc - gc
            dist = float(np.hypot(*d))
            if dist == 0.0 or dist > ring_r + 0.06:
                continue
            ang = math.atan2(d[1], d[0]) % (2 * math.pi)
            k = int(round(ang / (2 * math.pi / 16))) % 16
            u = geo.unit(k * 2 * math.pi / 16)
            # start between the goal and the neighbor, pushing outward
            extent = 0.5 * goal.footprint().extent_along(u)
            start = gc + u * (extent + 1.5 * cfg.world.cell)
            n = cfg.world.grid_size
            step = scene.workspace.size / n
            col = int(np.clip((start[0] - scene.workspace.x0) // step, 0, n - 1))
            row = int(np.clip((start[1] - scene.workspace.y0) // step, 0, n - 1))
            out.append(Action("push", k, row, col))
        return out

    def act(self, scene, goal_id, mode, pushes, rng):
        cfg = self.cfg
        if mode == "agnostic":
            px = find_grasp(scene, cfg, None, "agnostic")
            if px is not None:
                return Action("grasp", *px)
            goal_id = scene.objects[0].object_id
        px = find_grasp(scene, cfg, goal_id)
        if px is not None:
            return Action("grasp", *px)
        if pushes < cfg.agent.max_pushes:
            before = percept.render(scene, cfg.world, goal_id)
            best, best_score = None, -math.inf
            for a in self._push_candidates(scene, goal_id):
                nxt = execute(scene, a, cfg).next_scene
                after = percept.render(nxt, cfg.world, goal_id)
                score = percept.occupancy_ratio(before) - percept.occupancy_ratio(after)
                if score > best_score + 1e-12:
                    best, best_score = a, score
            if best is not None and best_score > 0.0:
                return best
        obs = percept.render(scene, cfg.world, goal_id)
        rows, cols = np.nonzero(obs.goal_mask)
        i = len(rows) // 2
        return Action("grasp", 0, int(rows[i]), int(cols[i]))


def _centroid(fp) -> np.ndarray:
    if isinstance(fp, geo.Disc):
        return fp.center.copy()
    return fp.verts.mean(axis=0)


class ScriptedPolicy:
    """Fixture policy cycling through tokens: ``push`` (a push that touches
    nothing), ``grasp`` (a grasp that lifts the goal), ``miss`` (a grasp on
    empty space) and ``wrong`` (a grasp lifting some other object)."""

    def __init__(self, cfg: Config, script: Sequence[str]):
        self.cfg = cfg
        self.script = list(script)
        self.i = 0

    def reset(self):
        self.i = 0

    def _empty_cell(self, scene: Scene):
        obs = percept.render(scene, self.cfg.world, None)
        free = ~(obs.occupied | percept.ring(obs.occupied, 8))
        rows, cols = np.nonzero(free)
        return int(rows[0]), int(cols[0])

    def act(self, scene, goal_id, mode, pushes, rng):
        tok = self.script[self.i % len(self.script)]
        self.i += 1
        if tok == "push":
            return Action("push", 0, *self._empty_cell(scene))
        if tok == "miss":
            return Action("grasp", 0, *self._empty_cell(scene))
        if tok == "grasp":
            px = find_grasp(scene, self.cfg, goal_id, mode)
        elif tok == "wrong":
            others = [o.object_id for o in scene.objects if o.object_id != goal_id]
            px = next((p for p in (find_grasp(scene, self.cfg, o) for o in others) if p), None)
        else:
            raise ValueError(f"unknown script token {tok!r}")
        if px is None:
            raise RuntimeError(f"script token {tok!r} has no realizing grasp")
        return Action("grasp", *px)
