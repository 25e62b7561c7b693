"""Transition storage with goal relabeling.

Transitions hold the pre- and post-action scenes rather than rendered grids,
so a relabeled copy can rebuild its goal masks exactly and the buffer stays
small.  Observations are rendered on demand.
"""
from __future__ import annotations

import csv
import dataclasses
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import rewards
from .config import PerceptConfig, RewardConfig, WorldConfig
from .errors import EmptyBuffer, EpisodeNotFound, RelabelOnGoal
from .percept import Observation, render
from .world import Scene, StepOutcome


@dataclass(frozen=True)
class Action:
    kind: str  # "push" | "grasp"
    k: int
    row: int
    col: int

    @property
    def pixel(self):
        return (self.k, self.row, self.col)


@dataclass(frozen=True)
class Transition:
    scene: Scene
    action: Action
    reward: float
    next_scene: Scene
    goal_id: int | None
    episode_id: int
    step_index: int
    kind: str
    grasped_id: int | None = None
    next_goal_id: int | None = None     # goal used when bootstrapping from next_scene
    relabeled_from: int | None = None   # original goal of a relabeled copy
    inputs: rewards.PushRewardInputs | None = None
    target: float | None = None

    def obs(self, world: WorldConfig | None = None) -> Observation:
        return render(self.scene, world, self.goal_id)

    def next_obs(self, world: WorldConfig | None = None) -> Observation:
        return render(self.next_scene, world, self.next_goal_id)

    @property
    def relabeled(self) -> bool:
        return self.relabeled_from is not None

    def outcome(self) -> StepOutcome:
        kind = "pushed" if self.kind == "push" else (
            "grasp-success" if self.grasped_id is not None else "grasp-fail")
        return StepOutcome(kind, self.grasped_id, frozenset(), self.next_scene)


class ReplayBuffer:
    """Bounded FIFO with an episode index."""

    def __init__(self, capacity: int = 20000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._slots: list = [None] * self.capacity
        self._count = 0  # total ever inserted
        self._episodes: dict[int, list[int]] = {}
        self._by_kind: dict[str, deque] = {}

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    @property
    def oldest_seq(self) -> int:
        return self._count - len(self)

    def _get(self, seq: int) -> Transition:
        return self._slots[seq % self.capacity]

    def __iter__(self):
        for seq in range(self.oldest_seq, self._count):
            yield self._get(seq)

    def append(self, t: Transition) -> None:
        if self._count >= self.capacity:
            old_seq = self._count - self.capacity
            old = self._get(old_seq)
            seqs = self._episodes[old.episode_id]
            seqs.remove(old_seq)
            if not seqs:
                del self._episodes[old.episode_id]
            self._by_kind[old.kind].popleft()
        seq = self._count
        self._slots[seq % self.capacity] = t
        self._episodes.setdefault(t.episode_id, []).append(seq)
        self._by_kind.setdefault(t.kind, deque()).append(seq)
        self._count += 1

    def episode(self, episode_id: int, include_relabeled: bool = False) -> list:
        if episode_id not in self._episodes:
            raise EpisodeNotFound(f"episode {episode_id} not in buffer")
        items = [self._get(s) for s in self._episodes[episode_id]]
        if not include_relabeled:
            items = [t for t in items if not t.relabeled]
        return sorted(items, key=lambda t: t.step_index)

    def episode_ids(self):
        return list(self._episodes)

    def count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self)
        return len(self._by_kind.get(kind, ()))

    def sample(self, rng: np.random.Generator, kind: str | None = None) -> Transition:
        """Uniform draw over stored transitions (optionally of one primitive kind)."""
        if kind is None:
            if not len(self):
                raise EmptyBuffer("replay buffer is empty")
            return self._get(self.oldest_seq + int(rng.integers(len(self))))
        seqs = self._by_kind.get(kind)
        if not seqs:
            raise EmptyBuffer(f"no {kind} transitions stored")
        return self._get(seqs[int(rng.integers(len(seqs)))])


def push_transition(buf: ReplayBuffer, t: Transition) -> None:
    buf.append(t)


def sample(buf: ReplayBuffer, rng: np.random.Generator, kind: str | None = None) -> Transition:
    return buf.sample(rng, kind)


def relabel_grasp(t: Transition, grasped_id: int) -> Transition:
    """Copy of a wrong-object catch with the goal moved to the caught object."""
    if t.kind != "grasp":
        raise ValueError("relabel_grasp needs a grasp transition")
    if grasped_id == t.goal_id:
        raise RelabelOnGoal(f"object {grasped_id} is already the goal")
    if t.grasped_id != grasped_id:
        raise ValueError(f"transition grasped {t.grasped_id}, not {grasped_id}")
    reward = rewards.grasp_reward(t.outcome(), grasped_id)
    # the caught object is gone; keep bootstrapping on the original goal if present
    nxt = t.goal_id if t.next_scene.has(t.goal_id) else t.next_goal_id
    return dataclasses.replace(t, goal_id=grasped_id, reward=reward, next_goal_id=nxt,
                               relabeled_from=t.goal_id, target=None)


def relabel_push(t: Transition, grasped_id: int, grasp_q: Callable[[Scene, int], float],
                 rcfg: RewardConfig | None = None, pcfg: PerceptConfig | None = None,
                 world: WorldConfig | None = None, dense: bool = True,
                 handcrafted: bool = False) -> Transition:
    """Copy of a push with goal ``grasped_id`` and its reward recomputed.

    ``grasp_q(scene, goal)`` returns the max grasp Q inside the goal's mask.
    """
    if t.kind != "push":
        raise ValueError("relabel_push needs a push transition")
    before = render(t.scene, world, grasped_id)
    after = render(t.next_scene, world, grasped_id)
    inp = rewards.push_inputs(before, after, grasp_q(t.scene, grasped_id),
                              grasp_q(t.next_scene, grasped_id), rcfg, pcfg)
    reward = rewards.push_reward_for(inp, dense, handcrafted)
    return dataclasses.replace(t, goal_id=grasped_id, next_goal_id=grasped_id, reward=reward,
                               inputs=inp, relabeled_from=t.goal_id, target=None)


def relabel_push_episode(buf: ReplayBuffer, episode_id: int, grasped_id: int,
                         grasp_q: Callable[[Scene, int], float], **kw) -> int:
    """Store relabeled copies of every push in an episode; returns the count."""
    copies = [relabel_push(t, grasped_id, grasp_q, **kw)
              for t in buf.episode(episode_id) if t.kind == "push"]
    for c in copies:
        buf.append(c)
    return len(copies)


# ---------------------------------------------------------------------------
# dump

CSV_FIELDS = ("index", "episode_id", "step_index", "kind", "goal_id", "relabeled_from", "k", "row",
              "col", "reward", "grasped_id", "q_before", "q_after", "changed", "o_decreased", "target")


def transition_row(i: int, t: Transition) -> dict:
    inp = t.inputs
    return {
        "index": i, "episode_id": t.episode_id, "step_index": t.step_index, "kind": t.kind,
        "goal_id": t.goal_id, "relabeled_from": t.relabeled_from, "k": t.action.k,
        "row": t.action.row, "col": t.action.col, "reward": t.reward, "grasped_id": t.grasped_id,
        "q_before": None if inp is None else repr(inp.q_before),
        "q_after": None if inp is None else repr(inp.q_after),
        "changed": None if inp is None else inp.changed,
        "o_decreased": None if inp is None else repr(inp.o_decreased),
        "target": None if t.target is None else repr(t.target),
    }


def dump(buf: ReplayBuffer, directory, world: WorldConfig | None = None) -> None:
    """Write ``transitions.csv`` plus rendered grids in ``observations.npz``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    arrays = {}
    with open(out / "transitions.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for i, t in enumerate(buf):
            w.writerow(transition_row(i, t))
            for tag, obs in (("obs", t.obs(world)), ("next", t.next_obs(world))):
                arrays[f"{i}_{tag}_depth"] = obs.depth
                arrays[f"{i}_{tag}_color"] = obs.color
                arrays[f"{i}_{tag}_mask"] = obs.goal_mask
    np.savez_compressed(out / "observations.npz", **arrays)
