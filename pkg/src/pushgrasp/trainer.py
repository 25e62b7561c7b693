"""Three-stage training: grasp only, push with a frozen grasp net, then
alternating phases.  Logs one CSV row per action and per episode."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import qfunc, replay
from .agent import GateConfig, QAgent, StateView, calibrate_threshold, epsilon, run_episode
from .config import Config
from .percept import encode, n_input_channels, render
from .qfunc import ParamSet
from .replay import ReplayBuffer, Transition
from .world import Scene, generate_random_scene

STAGE_CODES = {"I": 1, "II": 2, "III-push": 3, "III-grasp": 4}

ACTION_FIELDS = ("stage", "phase", "episode", "step", "kind", "goal_id", "k", "row", "col",
                 "explored", "delta", "reward", "q_before", "q_after", "changed", "o_decreased",
                 "target", "loss")
EPISODE_FIELDS = ("stage", "phase", "episode", "n_objects", "goal_id", "grasped_id", "success",
                  "wrong_catch", "n_pushes", "n_actions", "grasp_q", "eps", "threshold",
                  "trailing_success", "relabeled")


@dataclass(frozen=True)
class StageConfig:
    stage: str
    objects: int
    episodes: int
    train_grasp: bool
    train_push: bool
    drop_extent: float = 1.0
    objects_max: int | None = None

    def __post_init__(self):
        if self.train_grasp and self.train_push:
            raise ValueError("exactly one net is trainable at a time")


def stage_configs(cfg: Config) -> list:
    t = cfg.trainer
    out = [StageConfig("I", t.stage1_objects_min, t.stage1_episodes, True, False,
                       t.stage1_drop_extent, t.stage1_objects_max),
           StageConfig("II", t.stage2_objects, t.stage2_episodes, False, True, t.stage2_drop_extent)]
    if t.alternating:
        out += [StageConfig("III-push", t.stage3_objects, t.stage3_push_episodes, False, True,
                            t.stage2_drop_extent),
                StageConfig("III-grasp", t.stage3_objects, t.stage3_grasp_episodes, True, False,
                            t.stage2_drop_extent)]
    return out


def episode_rng(master: int, stage: str, episode: int) -> np.random.Generator:
    """Counter-based split: each (stage, episode) gets an independent stream."""
    return np.random.default_rng(np.random.SeedSequence([int(master), STAGE_CODES[stage], int(episode)]))


def trailing_rate(successes, window: int = 30) -> float:
    """Success rate over the last ``window`` episodes; before ``window``
    episodes exist the count is still divided by ``window``."""
    tail = list(successes)[-window:]
    return sum(bool(s) for s in tail) / window


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class TrainLog:
    actions: list = field(default_factory=list)
    episodes: list = field(default_factory=list)

    def write(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "actions.csv").write_text(_csv(ACTION_FIELDS, self.actions))
        (out / "episodes.csv").write_text(_csv(EPISODE_FIELDS, self.episodes))


def _csv(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in fields})
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def training_curves(log: TrainLog | list, window: int = 30, phase: str | None = None):
    """(per-episode, per-action) trailing success series.

    The per-action series has one entry per logged action, carrying the rate
    at the end of the episode that action belongs to.
    """
    rows = log.episodes if isinstance(log, TrainLog) else log
    if phase is not None:
        rows = [r for r in rows if r["phase"] == phase]
    succ, per_episode, per_action = [], [], []
    for r in rows:
        succ.append(str(r["success"]) in ("1", "True"))
        rate = trailing_rate(succ, window)
        per_episode.append(rate)
        per_action.extend([rate] * int(r["n_actions"]))
    return per_episode, per_action


def episodes_to_reach(rates, level: float):
    """1-based index of the first episode whose trailing rate reaches ``level``."""
    for i, r in enumerate(rates):
        if r >= level:
            return i + 1
    return None


class Trainer:
    def __init__(self, cfg: Config, grasp: ParamSet | None = None, push: ParamSet | None = None,
                 log: TrainLog | None = None):
        self.cfg = cfg
        c_in = n_input_channels(cfg.percept)
        n = cfg.world.grid_size
        self.grasp = grasp or qfunc.init_params(c_in, n, cfg.qfunc, "grasp", cfg.qfunc.init_seed)
        self.push = push or qfunc.init_params(c_in, n, cfg.qfunc, "push", cfg.qfunc.init_seed + 1)
        self.buffer = ReplayBuffer(cfg.replay.capacity)
        self.log = log or TrainLog()
        self.threshold = calibrate_threshold(cfg.agent)
        self.successful_qs: list = []
        self._cache: dict = {}
        GateConfig.from_config(cfg.agent, self.threshold)  # validates

    # -- targets ---------------------------------------------------------------

    def _next_max(self, net: ParamSet, scene: Scene, goal, kind: str) -> float:
        key = (kind, id(scene), goal, net.step)
        if key not in self._cache:
            agent = QAgent(self.grasp, self.push, self.cfg)
            v = agent.view(scene, goal)
            maps = qfunc.forward(net, v.stack)
            if kind == "grasp":
                val = maps.max_in(v.obs.goal_mask)
            else:
                val = float(maps.values.max())
            self._cache[key] = (scene, val)  # keep scene alive so id() stays unique
        return self._cache[key][1]

    def target_for(self, t: Transition, next_view: StateView | None = None) -> float:
        gamma = self.cfg.agent.gamma
        if t.kind == "grasp":
            if t.next_goal_id is None or not len(t.next_scene):
                nxt = 0.0
            else:
                nxt = self._next_max(self.grasp, t.next_scene, t.next_goal_id, "grasp")
                if not math.isfinite(nxt):
                    nxt = 0.0
        else:
            if next_view is not None and next_view.goal_id == t.next_goal_id:
                if next_view.push_q is None:
                    next_view.push_q = qfunc.forward(self.push, next_view.stack)
                nxt = float(next_view.push_q.values.max())
            else:
                nxt = self._next_max(self.push, t.next_scene, t.next_goal_id, "push")
        return qfunc.td_target(t.reward, nxt, gamma)

    # -- updates ---------------------------------------------------------------

    def _net(self, kind: str) -> ParamSet:
        return self.grasp if kind == "grasp" else self.push

    def _fit(self, t: Transition) -> float:
        planes = _planes(t, self.cfg)
        _, step = qfunc.train_on(self._net(t.kind), planes, t.action.pixel, t.target, self.cfg.qfunc)
        return step.loss

    def learn(self, t: Transition, rng: np.random.Generator, next_view: StateView | None = None,
              train: bool = True) -> tuple:
        """Store ``t`` with its target and, if its net is trainable, fit it plus
        ``replay_per_step`` uniformly replayed transitions of the same kind."""
        if train:
            t = dataclasses.replace(t, target=self.target_for(t, next_view))
        self.buffer.append(t)
        if not train:
            return t, None
        loss = self._fit(t)
        for _ in range(self.cfg.replay.replay_per_step):
            s = self.buffer.sample(rng, t.kind)
            if s.target is None:
                s = dataclasses.replace(s, target=self.target_for(s))
            self._fit(s)
        return t, loss

    def grasp_q_in_mask(self, scene: Scene, goal) -> float:
        return self._next_max(self.grasp, scene, goal, "grasp")

    # -- episodes --------------------------------------------------------------

    def run_training_episode(self, sc: StageConfig, episode: int, scene: Scene | None = None,
                             eps: float | None = None):
        cfg, t = self.cfg, self.cfg.trainer
        rng = episode_rng(t.seed, sc.stage, episode)
        if scene is None:
            hi = sc.objects_max if sc.objects_max is not None else sc.objects
            n = int(rng.integers(sc.objects, hi + 1)) if hi > sc.objects else sc.objects
            scene = generate_random_scene(n, rng, cfg.shapes, cfg.world, sc.drop_extent)
        if eps is None:
            eps = epsilon(episode, GateConfig.from_config(cfg.agent, self.threshold))
        self._cache.clear()
        agent = QAgent(self.grasp, self.push, cfg)
        rows = []
        n_relabeled = 0

        def on_transition(tr: Transition, nv: StateView | None):
            train = sc.train_grasp if tr.kind == "grasp" else sc.train_push
            stored, loss = self.learn(tr, rng, nv, train)
            rows.append((stored, loss))

        grasp_only = sc.stage == "I"
        rec = run_episode(scene, agent, rng, episode_id=episode, eps=eps, grasp_only=grasp_only,
                          q_threshold=self.threshold, dense_reward=t.dense_reward,
                          handcrafted=t.handcrafted_only, on_transition=on_transition)
        if rec.wrong_catch and t.goal_relabeling:
            g = rec.transitions[-1]
            copy, loss = self.learn(replay.relabel_grasp(g, rec.grasped_id), rng, None, sc.train_grasp)
            rows.append((copy, loss))
            n_relabeled += 1
            if sc.train_push:
                for p in rec.transitions[:-1]:
                    pc = replay.relabel_push(p, rec.grasped_id, self.grasp_q_in_mask, self.cfg.rewards,
                                             self.cfg.percept, self.cfg.world, t.dense_reward,
                                             t.handcrafted_only)
                    pc, loss = self.learn(pc, rng, None, True)
                    rows.append((pc, loss))
                    n_relabeled += 1
        self._cache.clear()
        for (tr, loss), d in zip(rows, rec.decisions + [None] * (len(rows) - len(rec.decisions))):
            inp = tr.inputs
            self.log.actions.append({
                "stage": sc.stage.split("-")[0], "phase": sc.stage, "episode": episode,
                "step": tr.step_index, "kind": tr.kind if not tr.relabeled else tr.kind + "-relabeled",
                "goal_id": tr.goal_id, "k": tr.action.k, "row": tr.action.row, "col": tr.action.col,
                "explored": None if d is None else d.explored,
                "delta": None if d is None else float(d.delta),
                "reward": float(tr.reward),
                "q_before": None if inp is None else float(inp.q_before),
                "q_after": None if inp is None else float(inp.q_after),
                "changed": None if inp is None else inp.changed,
                "o_decreased": None if inp is None else float(inp.o_decreased),
                "target": tr.target, "loss": loss,
            })
        return rec, n_relabeled, eps, len(scene)

    def run_stage(self, sc: StageConfig, start_episode: int = 0,
                  scene_source: Callable[[int, np.random.Generator], Scene] | None = None,
                  stop_at_rate: float | None = None, early_stop: bool = False) -> list:
        """Run one stage; returns the per-episode trailing success series."""
        window = self.cfg.trainer.trailing_window
        succ, qwin, rates = [], [], []
        for i in range(start_episode, start_episode + sc.episodes):
            scene = None
            if scene_source is not None:
                scene = scene_source(i, episode_rng(self.cfg.trainer.seed, sc.stage, i))
            rec, n_rel, eps, n_obj = self.run_training_episode(sc, i, scene)
            succ.append(rec.success)
            qwin.append(rec.terminal_q if rec.success else None)
            if rec.success:
                self.successful_qs.append(rec.terminal_q)
            rate = trailing_rate(succ, window)
            rates.append(rate)
            self.log.episodes.append({
                "stage": sc.stage.split("-")[0], "phase": sc.stage, "episode": i, "n_objects": n_obj,
                "goal_id": rec.goal_id, "grasped_id": rec.grasped_id, "success": rec.success,
                "wrong_catch": rec.wrong_catch, "n_pushes": rec.n_pushes, "n_actions": rec.n_actions,
                "grasp_q": rec.terminal_q, "eps": float(eps), "threshold": float(self.threshold),
                "trailing_success": rate, "relabeled": n_rel,
            })
            if stop_at_rate is not None and rate >= stop_at_rate:
                break
            if early_stop and len(succ) >= window and rate >= self.cfg.trainer.early_stop_success:
                recent = [q for q in qwin[-window:] if q is not None]
                if recent and float(np.mean(recent)) >= self.threshold:
                    break
        if sc.stage == "I" and self.cfg.agent.threshold_mode != "fixed":
            self.threshold = calibrate_threshold(self.cfg.agent, self.successful_qs[-window:])
        return rates


def _planes(t: Transition, cfg: Config) -> np.ndarray:
    return encode(render(t.scene, cfg.world, t.goal_id), cfg.world, cfg.percept)


# ---------------------------------------------------------------------------
# stage entry points

def train_stage1(cfg: Config, trainer: Trainer | None = None, scene_source=None):
    tr = trainer or Trainer(cfg)
    sc = stage_configs(cfg)[0]
    rates = tr.run_stage(sc, scene_source=scene_source, early_stop=cfg.trainer.stage1_early_stop)
    return tr.grasp, rates


def train_stage2(cfg: Config, trainer: Trainer, stop_at_rate: float | None = None):
    sc = stage_configs(cfg)[1]
    before = trainer.grasp.checksum()
    rates = trainer.run_stage(sc, stop_at_rate=stop_at_rate)
    if trainer.grasp.checksum() != before:
        raise RuntimeError("grasp net changed during stage II")
    return trainer.push, rates


def train_stage3(cfg: Config, trainer: Trainer):
    """Alternating push and grasp phases; returns per-phase curves."""
    t = cfg.trainer
    scs = stage_configs(cfg)
    if not t.alternating:
        return trainer.grasp, trainer.push, {}
    curves = {"III-push": [], "III-grasp": []}
    for cycle in range(t.stage3_cycles):
        for sc in scs[2:]:
            frozen = trainer.grasp if sc.train_push else trainer.push
            before = frozen.checksum()
            start = cycle * sc.episodes
            curves[sc.stage] += trainer.run_stage(sc, start_episode=start)
            if frozen.checksum() != before:
                raise RuntimeError(f"frozen net changed during {sc.stage}")
    return trainer.grasp, trainer.push, curves


def train_all(cfg: Config, out_dir=None, stages=(1, 2, 3), trainer: Trainer | None = None) -> Trainer:
    tr = trainer or Trainer(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if 1 in stages:
        train_stage1(cfg, tr)
        if out:
            qfunc.save_checkpoint(tr.grasp, out / "stage1_grasp.ckpt")
    if 2 in stages:
        train_stage2(cfg, tr)
        if out:
            qfunc.save_checkpoint(tr.push, out / "stage2_push.ckpt")
    if 3 in stages and cfg.trainer.alternating:
        train_stage3(cfg, tr)
        if out:
            qfunc.save_checkpoint(tr.grasp, out / "stage3_grasp.ckpt")
            qfunc.save_checkpoint(tr.push, out / "stage3_push.ckpt")
    if out:
        qfunc.save_checkpoint(tr.grasp, out / "grasp.ckpt")
        qfunc.save_checkpoint(tr.push, out / "push.ckpt")
        tr.log.write(out)
        ep, act = training_curves(tr.log, cfg.trainer.trailing_window)
        (out / "curve_episodes.csv").write_text(
            "episode,trailing_success\n" + "".join(f"{i + 1},{r!r}\n" for i, r in enumerate(ep)))
        (out / "curve_actions.csv").write_text(
            "action,trailing_success\n" + "".join(f"{i + 1},{r!r}\n" for i, r in enumerate(act)))
        (out / "threshold.txt").write_text(f"{tr.threshold!r}\n")
    return tr
