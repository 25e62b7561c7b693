"""Grasp and push rewards."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import PerceptConfig, RewardConfig
from .percept import Observation, neighborhood_change
from .world import StepOutcome

PREDICATES = ("conjunction", "any-change")


@dataclass(frozen=True)
class PushRewardInputs:
    q_before: float
    q_after: float
    changed: int
    o_decreased: float
    tau_q: float = 0.1
    tau_o: float = 0.1
    tau_c: int = 10
    predicate: str = "conjunction"

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise ValueError(f"unknown change predicate {self.predicate!r}")
        for name in ("q_before", "q_after", "o_decreased"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def q_improvement(self) -> float:
        return self.q_after - self.q_before


def grasp_reward(outcome: StepOutcome, goal_id) -> float:
    if outcome.kind == "grasp-success" and goal_id is not None and outcome.grasped_id == goal_id:
        return 1.0
    return 0.0


def change_detected(inp: PushRewardInputs) -> bool:
    surroundings = inp.changed >= inp.tau_c
    cleared = inp.o_decreased > inp.tau_o
    if inp.predicate == "conjunction":
        return surroundings and cleared
    return surroundings or cleared


def push_reward(inp: PushRewardInputs) -> float:
    if not change_detected(inp):
        return -0.5
    if inp.q_improvement > inp.tau_q:
        return 0.5
    return 0.0


def handcrafted_only_reward(inp: PushRewardInputs) -> float:
    """Ablation comparator: rewards any detected change, ignores the grasp net."""
    return 0.5 if change_detected(inp) else -0.5


def push_inputs(before: Observation, after: Observation, q_before: float, q_after: float,
                rcfg: RewardConfig | None = None, pcfg: PerceptConfig | None = None) -> PushRewardInputs:
    rcfg = rcfg or RewardConfig()
    pcfg = pcfg or PerceptConfig()
    changed, o_dec = neighborhood_change(before, after, pcfg.ring_radius, pcfg.depth_tolerance)
    return PushRewardInputs(q_before, q_after, changed, o_dec, rcfg.tau_q, rcfg.tau_o,
                            rcfg.tau_c, rcfg.change_predicate)


def push_reward_for(inp: PushRewardInputs, dense: bool = True, handcrafted: bool = False) -> float:
    """Reward under the ablation flags: dense (default), handcrafted comparator, or none."""
    if handcrafted:
        return handcrafted_only_reward(inp)
    if not dense:
        return 0.0
    return push_reward(inp)
