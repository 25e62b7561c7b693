"""Hierarchical push/grasp policy: gate on the grasp net, act greedily or explore."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import percept, qfunc, rewards
from .config import AgentConfig, Config
from .percept import Observation
from .qfunc import ParamSet, QMapSet
from .replay import Action, Transition
from .world import Scene, apply_grasp, apply_push, grasp_command, push_command

MODES = ("goal", "agnostic")


@dataclass(frozen=True)
class GateConfig:
    q_threshold: float = 1.8
    max_pushes: int = 5
    gamma: float = 0.5
    eps_start: float = 0.5
    eps_end: float = 0.1
    eps_anneal_episodes: int = 500

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.q_threshold >= 1.0 / (1.0 - self.gamma):
            raise ValueError("threshold must be below the grasp fixed point r/(1-gamma)")
        if self.max_pushes < 1:
            raise ValueError("max_pushes must be >= 1")

    @classmethod
    def from_config(cls, cfg: AgentConfig, threshold: float | None = None) -> "GateConfig":
        return cls(cfg.q_threshold if threshold is None else threshold, cfg.max_pushes, cfg.gamma,
                   cfg.eps_start, cfg.eps_end, cfg.eps_anneal_episodes)


@dataclass(frozen=True)
class Decision:
    action: Action
    delta: float
    explored: bool
    gate: bool


def calibrate_threshold(cfg: AgentConfig, successful_qs=()) -> float:
    """Threshold for the gate under the configured calibration mode."""
    if cfg.threshold_mode == "fixed":
        return cfg.q_threshold
    if cfg.threshold_mode == "analytic":
        return cfg.threshold_fraction * 1.0 / (1.0 - cfg.gamma)
    if cfg.threshold_mode == "percentile":
        qs = np.asarray(list(successful_qs), dtype=np.float64)
        if qs.size == 0:
            return cfg.q_threshold
        return float(np.percentile(qs, cfg.threshold_percentile))
    raise ValueError(f"unknown threshold mode {cfg.threshold_mode!r}")


def epsilon(episode: int, gcfg: GateConfig) -> float:
    if gcfg.eps_anneal_episodes <= 0:
        return gcfg.eps_end
    frac = min(max(episode, 0) / gcfg.eps_anneal_episodes, 1.0)
    return gcfg.eps_start + frac * (gcfg.eps_end - gcfg.eps_start)


def gate(grasp_q: QMapSet, mask, q_threshold: float = 1.8):
    m = grasp_q.max_in(mask)
    if m == -math.inf:
        return False, -math.inf
    return m > q_threshold, m - q_threshold


def argmax_pixel(values: np.ndarray, mask=None):
    """Lowest (k, row, col) among the maxima, optionally restricted to a 2D mask."""
    if mask is not None:
        values = np.where(np.asarray(mask, dtype=bool)[None], values, -np.inf)
    idx = int(np.argmax(values))
    return tuple(int(v) for v in np.unravel_index(idx, values.shape))


def valid_cells(obs: Observation, kind: str, ring_radius: int = 4, mask=None) -> np.ndarray:
    """Cells exploration may sample: the mask for grasps, occupied cells plus
    their surrounding ring for pushes."""
    if kind == "grasp":
        cells = np.asarray(obs.goal_mask if mask is None else mask, dtype=bool)
    else:
        occ = obs.occupied
        cells = occ | percept.ring(occ, ring_radius)
    if not cells.any():
        cells = np.ones(obs.shape, dtype=bool)
    return cells


def _explore(rng: np.random.Generator, cells: np.ndarray, kind: str, n_rot: int = 16) -> Action:
    rows, cols = np.nonzero(cells)
    i = int(rng.integers(len(rows) * n_rot))
    k, j = divmod(i, len(rows))
    return Action(kind, k, int(rows[j]), int(cols[j]))


def select_action(push_q: QMapSet | None, grasp_q: QMapSet, obs: Observation, mode: str,
                  eps: float, rng: np.random.Generator, q_threshold: float = 1.8,
                  force_grasp: bool = False, ring_radius: int = 4) -> Decision:
    """Gate, then exploit (argmax) or explore with probability ``eps``.

    In agnostic mode the grasp mask is every occupied cell.  ``push_q`` may be
    None when the caller knows the gate will pick a grasp.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    mask = obs.occupied if mode == "agnostic" else obs.goal_mask
    g, delta = gate(grasp_q, mask, q_threshold)
    kind = "grasp" if (g or force_grasp) else "push"
    explore = rng.random() < eps
    if explore:
        action = _explore(rng, valid_cells(obs, kind, ring_radius, mask), kind, len(grasp_q.values))
    elif kind == "grasp":
        action = Action("grasp", *argmax_pixel(grasp_q.values, mask if mask.any() else None))
    else:
        if push_q is None:
            raise ValueError("push map required when the gate selects a push")
        action = Action("push", *argmax_pixel(push_q.values))
    return Decision(action, delta, bool(explore), bool(g))


# ---------------------------------------------------------------------------
# episodes

def pixel_to_world(scene: Scene, grid_size: int, row: int, col: int):
    ws = scene.workspace
    step = ws.size / grid_size
    return ws.x0 + (col + 0.5) * step, ws.y0 + (row + 0.5) * step


def execute(scene: Scene, action: Action, cfg: Config):
    n = cfg.world.grid_size
    xy = pixel_to_world(scene, n, action.row, action.col)
    if action.kind == "push":
        return apply_push(scene, push_command(cfg.world, xy, action.k), cfg.world)
    return apply_grasp(scene, grasp_command(cfg.world, xy, action.k), cfg.world)


@dataclass
class StateView:
    """One rendered state with lazily evaluated Q maps."""
    scene: Scene
    goal_id: int | None
    obs: Observation
    stack: np.ndarray
    grasp_q: QMapSet | None = None
    push_q: QMapSet | None = None


@dataclass
class QAgent:
    grasp: ParamSet
    push: ParamSet | None
    cfg: Config

    def view(self, scene: Scene, goal_id, mode: str = "goal") -> StateView:
        obs = percept.render(scene, self.cfg.world, goal_id, agnostic=(mode == "agnostic"))
        planes = percept.encode(obs, self.cfg.world, self.cfg.percept)
        return StateView(scene, goal_id, obs, percept.rotate_stack(planes))

    def grasp_maps(self, v: StateView) -> QMapSet:
        if v.grasp_q is None:
            v.grasp_q = qfunc.forward(self.grasp, v.stack)
        return v.grasp_q

    def push_maps(self, v: StateView) -> QMapSet:
        if v.push_q is None:
            v.push_q = qfunc.forward(self.push, v.stack)
        return v.push_q

    def decide(self, v: StateView, mode: str, eps: float, rng: np.random.Generator,
               q_threshold: float, force_grasp: bool = False) -> Decision:
        gq = self.grasp_maps(v)
        mask = v.obs.occupied if mode == "agnostic" else v.obs.goal_mask
        wants_grasp = force_grasp or gate(gq, mask, q_threshold)[0]
        pq = None if (wants_grasp or self.push is None) else self.push_maps(v)
        if pq is None and not wants_grasp:
            force_grasp = True
        return select_action(pq, gq, v.obs, mode, eps, rng, q_threshold, force_grasp,
                             self.cfg.percept.ring_radius)


@dataclass
class EpisodeRecord:
    episode_id: int
    goal_id: int | None
    transitions: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    grasped_id: int | None = None
    final_scene: Scene | None = None
    terminal_q: float | None = None  # predicted Q at the executed grasp pixel

    @property
    def success(self) -> bool:
        return self.grasped_id is not None and self.grasped_id == self.goal_id

    @property
    def wrong_catch(self) -> bool:
        return self.grasped_id is not None and self.grasped_id != self.goal_id

    @property
    def n_pushes(self) -> int:
        return sum(1 for d in self.decisions if d.action.kind == "push")

    @property
    def n_actions(self) -> int:
        return len(self.decisions)


def next_goal(next_scene: Scene, goal_id, rng: np.random.Generator):
    """Goal used to bootstrap from a post-grasp state: the same goal while it
    remains, otherwise a uniformly drawn remaining object (None if empty)."""
    if goal_id is not None and next_scene.has(goal_id):
        return goal_id
    ids = next_scene.ids()
    if not ids:
        return None
    return ids[int(rng.integers(len(ids)))]


def run_episode(scene: Scene, agent: QAgent, rng: np.random.Generator, *, episode_id: int = 0,
                eps: float = 0.0, mode: str = "goal", grasp_only: bool = False,
                q_threshold: float | None = None, dense_reward: bool = True,
                handcrafted: bool = False,
                on_transition: Callable[[Transition, StateView], None] | None = None) -> EpisodeRecord:
    """Up to ``max_pushes`` pushes, ending with exactly one grasp.

    ``on_transition(t, next_view)`` runs after every step, before the next
    decision; a trainer may fill ``next_view.push_q`` and it is reused.
    """
    cfg = agent.cfg
    if not len(scene):
        raise ValueError("episode needs at least one object")
    thr = cfg.agent.q_threshold if q_threshold is None else q_threshold
    goal = scene.goal_id if mode == "goal" else None
    rec = EpisodeRecord(episode_id, goal)
    v = agent.view(scene, goal, mode)
    step = 0
    while True:
        force = grasp_only or rec.n_pushes >= cfg.agent.max_pushes
        d = agent.decide(v, mode, eps, rng, thr, force)
        rec.decisions.append(d)
        a = d.action
        out = execute(v.scene, a, cfg)
        if a.kind == "push":
            nv = agent.view(out.next_scene, goal, mode)
            mask = v.obs.occupied if mode == "agnostic" else v.obs.goal_mask
            nmask = nv.obs.occupied if mode == "agnostic" else nv.obs.goal_mask
            q_before = agent.grasp_maps(v).max_in(mask)
            q_after = agent.grasp_maps(nv).max_in(nmask)
            inp = None
            if math.isfinite(q_before) and math.isfinite(q_after) and goal is not None:
                inp = rewards.push_inputs(v.obs, nv.obs, q_before, q_after, cfg.rewards, cfg.percept)
                r = rewards.push_reward_for(inp, dense_reward, handcrafted)
            else:
                r = 0.0
            t = Transition(v.scene, a, r, out.next_scene, goal, episode_id, step, "push",
                           next_goal_id=goal, inputs=inp)
            rec.transitions.append(t)
            if on_transition is not None:
                on_transition(t, nv)
            v = nv
            step += 1
            continue
        rec.terminal_q = float(agent.grasp_maps(v).values[a.pixel])
        rec.grasped_id = out.grasped_id
        r = rewards.grasp_reward(out, goal)
        nxt = next_goal(out.next_scene, goal, rng)
        t = Transition(v.scene, a, r, out.next_scene, goal, episode_id, step, "grasp",
                       grasped_id=out.grasped_id, next_goal_id=nxt)
        rec.transitions.append(t)
        rec.final_scene = out.next_scene
        if on_transition is not None:
            on_transition(t, None)
        return rec
