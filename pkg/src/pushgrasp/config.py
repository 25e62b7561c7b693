"""Run configuration.

All tunables live in one tree of dataclasses.  On disk the tree is a flat
text file of ``section.key = value`` lines, which keeps run provenance
diff-able.  Environment variables ``PUSHGRASP_<section>__<key>`` override
file values; command-line overrides are applied last.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_type_hints

from .errors import ConfigError

ENV_PREFIX = "PUSHGRASP_"
CONFIG_HEADER = "# pushgrasp config v1"


@dataclass
class WorldConfig:
    workspace_size: float = 0.64
    grid_size: int = 64
    push_length_cells: float = 5.0
    pusher_radius_cells: float = 1.0
    gripper_opening_cells: float = 4.0
    jaw_length_cells: float = 3.0
    jaw_thickness_cells: float = 1.0
    overlap_tolerance_cells: float = 0.25  # in units of cell area
    move_tolerance: float = 1e-4
    max_attempts: int = 1000
    grasp_supersample: int = 4
    height_max: float = 0.1

    @property
    def cell(self) -> float:
        return self.workspace_size / self.grid_size


@dataclass
class ShapePoolConfig:
    kinds: tuple = ("rect", "disc", "triangle")
    rect_side_min: float = 0.02
    rect_side_max: float = 0.035
    rect_length_max: float = 0.05
    disc_radius_min: float = 0.01
    disc_radius_max: float = 0.0175
    triangle_base_min: float = 0.025
    triangle_base_max: float = 0.035
    height_min: float = 0.02
    height_max: float = 0.05
    n_colors: int = 8


@dataclass
class PerceptConfig:
    ring_radius: int = 4
    depth_tolerance: float = 0.001
    n_colors: int = 8
    n_rotations: int = 16


@dataclass
class QConfig:
    channels: tuple = (16, 16, 16, 16)
    dilations: tuple = (1, 1, 2, 2)
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    adam_eps: float = 1e-8
    weight_decay: float = 2e-5
    huber_delta: float = 1.0
    init_seed: int = 0


@dataclass
class RewardConfig:
    tau_q: float = 0.1
    tau_o: float = 0.1
    tau_c: int = 10
    change_predicate: str = "conjunction"  # or "any-change"


@dataclass
class ReplayConfig:
    capacity: int = 20000
    replay_per_step: int = 1


@dataclass
class AgentConfig:
    q_threshold: float = 1.8
    threshold_mode: str = "fixed"  # fixed | analytic | percentile
    threshold_fraction: float = 0.9
    threshold_percentile: float = 20.0
    max_pushes: int = 5
    gamma: float = 0.5
    eps_start: float = 0.5
    eps_end: float = 0.1
    eps_anneal_episodes: int = 500


@dataclass
class TrainerConfig:
    seed: int = 0
    stage1_objects_min: int = 5
    stage1_objects_max: int = 5
    stage1_episodes: int = 2000
    stage1_early_stop: bool = True
    stage1_drop_extent: float = 1.0
    stage2_objects: int = 10
    stage2_episodes: int = 1500
    stage2_drop_extent: float = 0.4
    stage3_objects: int = 10
    stage3_push_episodes: int = 500
    stage3_grasp_episodes: int = 1000
    stage3_cycles: int = 1
    trailing_window: int = 30
    early_stop_success: float = 0.8
    dense_reward: bool = True
    goal_relabeling: bool = True
    alternating: bool = True
    handcrafted_only: bool = False


@dataclass
class EvalConfig:
    seed: int = 0
    n_runs: int = 30
    max_consecutive_failures: int = 10
    motion_cap: int = 50
    random_suite_objects: int = 12
    random_suite_cases: int = 10
    random_drop_extent: float = 0.5
    jitter_cells: float = 1.0
    height_suite_cases: int = 5


@dataclass
class Config:
    world: WorldConfig = field(default_factory=WorldConfig)
    shapes: ShapePoolConfig = field(default_factory=ShapePoolConfig)
    percept: PerceptConfig = field(default_factory=PerceptConfig)
    qfunc: QConfig = field(default_factory=QConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_flat(self) -> dict[str, Any]:
        flat = {}
        for section in dataclasses.fields(self):
            sub = getattr(self, section.name)
            for f in dataclasses.fields(sub):
                flat[f"{section.name}.{f.name}"] = getattr(sub, f.name)
        return flat

    def replace(self, **dotted) -> "Config":
        """Return a copy with ``section__key=value`` (or dotted via dict) overrides."""
        cfg = copy_config(self)
        for key, value in dotted.items():
            set_key(cfg, key.replace("__", "."), value, parse=False)
        return cfg


ABLATIONS = {
    "full": {},
    "no-dense-reward": {"trainer.dense_reward": False, "trainer.goal_relabeling": False},
    "no-goal-condition": {"trainer.goal_relabeling": False},
    "no-alternating": {"trainer.alternating": False},
    "handcrafted-only": {"trainer.handcrafted_only": True},
}


def copy_config(cfg: Config) -> Config:
    return Config(**{f.name: dataclasses.replace(getattr(cfg, f.name))
                     for f in dataclasses.fields(cfg)})


def _field_type(section_obj, name):
    hints = get_type_hints(type(section_obj))
    return hints[name]


def _parse_value(kind, raw: str, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            out = []
            for s in items:
                try:
                    out.append(int(s))
                except ValueError:
                    out.append(s)
            return tuple(out)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def set_key(cfg: Config, key: str, value, parse: bool = True) -> None:
    if key.count(".") != 1:
        raise ConfigError(f"unknown config key {key!r}")
    section, name = key.split(".")
    if not hasattr(cfg, section) or section.startswith("_"):
        raise ConfigError(f"unknown config key {key!r}")
    sub = getattr(cfg, section)
    if name not in {f.name for f in dataclasses.fields(sub)}:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _field_type(sub, name)
    if parse or isinstance(value, str):
        value = _parse_value(kind, str(value), key)
    setattr(sub, name, value)


def parse_config_text(text: str, base: Config | None = None) -> Config:
    cfg = copy_config(base) if base is not None else Config()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        try:
            set_key(cfg, key.strip(), value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load_config(path=None, overrides: dict | None = None, environ=None) -> Config:
    """Defaults <- file <- environment <- explicit overrides."""
    cfg = Config()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cfg = parse_config_text(p.read_text(), cfg)
    environ = os.environ if environ is None else environ
    for name, value in sorted(environ.items()):
        if name.startswith(ENV_PREFIX) and "__" in name:
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            set_key(cfg, key, value)
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value, parse=isinstance(value, str))
    return cfg


def dump_config(cfg: Config) -> str:
    lines = [CONFIG_HEADER]
    for key, value in cfg.to_flat().items():
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def apply_ablation(cfg: Config, name: str) -> Config:
    if name not in ABLATIONS:
        raise ConfigError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
    out = copy_config(cfg)
    for key, value in ABLATIONS[name].items():
        set_key(out, key, value, parse=False)
    return out
