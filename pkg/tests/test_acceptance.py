"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 9 and 10 are hour-scale and run only with PUSHGRASP_NIGHTLY=1.
"""
import itertools
import math
import os
import statistics
import time

import numpy as np
import pytest

from pushgrasp import cli, qfunc, trainer
from pushgrasp.config import Config, QConfig, apply_ablation
from pushgrasp.evalkit import ScriptedPolicy, run_once, run_test
from pushgrasp.percept import quarter_turn
from pushgrasp.rewards import PushRewardInputs, grasp_reward, push_reward
from pushgrasp.world import (ObjectSpec, Pose2D, Scene, SceneObject, StepOutcome, WorldConfig,
                             apply_grasp, grasp_command)

from .helpers import fd_gradient_check, grasp_oracle
from .test_agent import gate_violations
from .test_cli import TINY
from .test_evalkit import ByGoal, isolated
from .test_qfunc import check_equivariance, planes, toy
from .test_replay import check_relabeled_episodes
from .test_world import _random_grasp_pairs, _random_push_cases, check_push_invariants

NIGHTLY = os.environ.get("PUSHGRASP_NIGHTLY") == "1"


@pytest.fixture
def verdict(capsys):
    """Print the criterion line outside pytest's capture and assert it."""
    def emit(n, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  "
                  f"[{elapsed:.1f} s, budget {budget:.0f} s]")
        assert ok, detail
    return emit


@pytest.fixture
def nightly_only(capsys, request):
    if not NIGHTLY:
        n = int(request.node.name.split("_")[2])
        with capsys.disabled():
            print(f"\ncriterion {n}: SKIPPED  nightly tier, set PUSHGRASP_NIGHTLY=1 to run")
        pytest.skip("nightly tier: set PUSHGRASP_NIGHTLY=1")


def test_criterion_01_reward_exactness(verdict):
    t0 = time.perf_counter()
    gains = (-1.0, 0.0, 0.1, 0.1000001, 2.0)
    changed = (0, 9, 10, 11, 400)
    o_dec = (-0.3, 0.0, 0.1, 0.1000001, 1.0)
    bad = n = 0
    for g, c, o in itertools.product(gains, changed, o_dec):
        expect = -0.5 if not (c >= 10 and o > 0.1) else (0.5 if g > 0.1 else 0.0)
        bad += push_reward(PushRewardInputs(0.0, g, c, o)) != expect
        n += 1
    empty = Scene(())
    for kind, grasped, goal in itertools.product(("grasp-success", "grasp-fail"), (None, 3, 4), (None, 3)):
        if kind == "grasp-fail" and grasped is not None:
            continue
        expect = 1.0 if kind == "grasp-success" and grasped is not None and grasped == goal else 0.0
        bad += grasp_reward(StepOutcome(kind, grasped, frozenset(), empty), goal) != expect
        n += 1
    verdict(1, bad == 0, f"{n} table rows, {bad} mismatches", time.perf_counter() - t0, 1)


def test_criterion_02_relabeling(verdict):
    t0 = time.perf_counter()
    done, bad, seen = check_relabeled_episodes(200, 1)
    detail = f"{done} wrong-catch episodes, {bad} mismatches, replayed push rewards {dict(sorted(seen.items()))}"
    verdict(2, done == 200 and bad == 0, detail, time.perf_counter() - t0, 30)


def test_criterion_03_gating(verdict):
    t0 = time.perf_counter()
    bad = gate_violations(1000, 7)
    verdict(3, bad == 0, f"1000 (QMapSet, mask) pairs, {bad} violations", time.perf_counter() - t0, 5)


def test_criterion_04_gradient_check(verdict):
    t0 = time.perf_counter()
    p, x = toy(8, 11), planes(8, 12)
    before = fd_gradient_check(p, x, (5, 3, 4), 0.8, n_params=60, seed=1)
    rng = np.random.default_rng(13)
    cfg = QConfig(lr=1e-3)
    for _ in range(1000):
        pix = (int(rng.integers(16)), int(rng.integers(8)), int(rng.integers(8)))
        qfunc.train_on(p, x, pix, float(rng.uniform(0, 2)), cfg)
    after = fd_gradient_check(p, x, (5, 3, 4), 0.8, n_params=60, seed=2)
    verdict(4, before < 1e-4 and after < 1e-4,
            f"max relative error {before:.2e} at init, {after:.2e} after 1000 steps",
            time.perf_counter() - t0, 60)


def test_criterion_05_equivariance(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    ok = sum(check_equivariance(toy(16, int(s)), planes(16, int(s) + 1))
             for s in rng.integers(0, 2**31, 100))
    # the rotated input itself must be lossless for the comparison to be exact
    x = planes(16, 0)
    assert np.array_equal(quarter_turn(quarter_turn(x, 1), -1), x)
    verdict(5, ok == 100, f"{ok}/100 inputs exactly equivariant", time.perf_counter() - t0, 30)


def test_criterion_06_simulator_oracles(verdict):
    t0 = time.perf_counter()
    w = WorldConfig()
    agree = successes = 0
    for s, c, k in _random_grasp_pairs(1000, 606):
        got = apply_grasp(s, grasp_command(w, c, k), w).grasped_id
        agree += got == grasp_oracle(s, c, k)
        successes += got is not None
    violations = 0
    for s, cmd in _random_push_cases(1000, 607):
        try:
            check_push_invariants(s, cmd)
        except AssertionError:
            violations += 1
    detail = (f"grasp agreement {agree}/1000 ({successes} lifts), "
              f"push invariants held on {1000 - violations}/1000")
    verdict(6, agree == 1000 and violations == 0, detail, time.perf_counter() - t0, 120)


def test_criterion_07_metric_fixtures(verdict):
    t0 = time.perf_counter()
    cfg = Config()
    checks = []
    # (script, completed, attempts, successes, motions), counted by hand
    for script, *expect in [(["push", "push", "grasp"], True, 1, 1, 3),
                            (["miss", "miss", "grasp"], True, 3, 1, 3),
                            (["wrong", "grasp"], True, 2, 1, 2),
                            (["miss"] * 9 + ["grasp"], True, 10, 1, 10),
                            (["miss"], False, 10, 0, 10)]:
        r = run_once(isolated(), ScriptedPolicy(cfg, script), cfg, np.random.default_rng(0))
        checks.append((r.completed, r.goal_grasp_attempts, r.goal_grasp_successes, r.total_motions)
                      == tuple(expect))
    rep = run_test([("a", isolated(0)), ("b", isolated(1)), ("c", isolated(2))],
                   ByGoal(cfg, {0: ["push", "push", "grasp"], 1: ["miss", "grasp"], 2: ["miss"]}), cfg, n_runs=3)
    cells = [(c.completion, c.grasp_success, c.motion_number) for c in rep.cases]
    checks.append(cells == [(100.0, 100.0, 3.0), (100.0, 50.0, 2.0), (0.0, None, None)])
    checks.append((rep.completion, rep.grasp_success, rep.motion_number) == (200 / 3, 75.0, 2.5))
    # trailing curve divides by the window from the first episode on
    succ = [True, False, True] + [True] * 40
    rates = [trainer.trailing_rate(succ[:i + 1]) for i in range(len(succ))]
    checks.append(rates[:3] == [1 / 30, 1 / 30, 2 / 30] and rates[29] == 29 / 30 and rates[31] == 1.0)
    verdict(7, all(checks), f"{sum(checks)}/{len(checks)} fixtures exact", time.perf_counter() - t0, 5)


FIXED_POINT_EPISODES = 1200
FIXED_POINT_WINDOW = 200


def fixed_point_scene(_episode, rng):
    """Four isolated 3x3 blocks; any of them can be the goal."""
    c = 0.01
    objs = tuple(SceneObject(ObjectSpec(i, "rect", (3 * c, 3 * c), 0.03, i), Pose2D(x * c, y * c))
                 for i, (x, y) in enumerate([(16, 16), (48, 16), (16, 48), (48, 48)]))
    return Scene(objs, goal_id=int(rng.integers(4)))


@pytest.mark.slow
def test_criterion_08_fixed_point(verdict):
    t0 = time.perf_counter()
    cfg = Config()
    cfg.trainer.stage1_episodes = FIXED_POINT_EPISODES
    cfg.trainer.stage1_early_stop = False
    tr = trainer.Trainer(cfg)
    trainer.train_stage1(cfg, tr, scene_source=fixed_point_scene)
    tail = tr.log.episodes[-FIXED_POINT_WINDOW:]
    qs = [e["grasp_q"] for e in tail if e["success"]]
    mean_q = float(np.mean(qs))
    bound = 1.0 / (1.0 - cfg.agent.gamma)
    detail = (f"mean successful-grasp Q {mean_q:.3f} over the last {FIXED_POINT_WINDOW} episodes "
              f"({len(qs)} successes), target [{0.9 * bound:.1f}, {bound:.1f}]")
    verdict(8, 0.9 * bound <= mean_q <= bound, detail, time.perf_counter() - t0, 20 * 60)


def stage1_config(seed):
    cfg = Config()
    cfg.trainer.seed = seed
    cfg.trainer.stage1_objects_min, cfg.trainer.stage1_objects_max = 3, 5
    cfg.trainer.stage1_episodes = 2000
    cfg.trainer.stage1_early_stop = False
    return cfg


@pytest.mark.nightly
def test_criterion_09_learning_trend(nightly_only, verdict):
    t0 = time.perf_counter()
    reach = []
    for seed in (0, 1, 2):
        cfg = stage1_config(seed)
        tr = trainer.Trainer(cfg)
        sc = trainer.stage_configs(cfg)[0]
        rates = tr.run_stage(sc, stop_at_rate=0.7)
        hit = trainer.episodes_to_reach(rates, 0.7)
        reach.append(math.inf if hit is None else hit)
    med = statistics.median(reach)
    verdict(9, med <= 2000, f"episodes to 70% per seed {reach}, median {med}", time.perf_counter() - t0,
            2 * 3600)


ABLATION_BUDGET = int(os.environ.get("PUSHGRASP_ABLATION_EPISODES", "400"))


def episodes_to_60(grasp, seed, ablation):
    cfg = apply_ablation(stage1_config(seed), ablation)
    cfg.trainer.stage2_episodes = ABLATION_BUDGET
    tr = trainer.Trainer(cfg, grasp=grasp.copy())
    tr.threshold = cfg.agent.q_threshold
    _, rates = trainer.train_stage2(cfg, tr, stop_at_rate=0.6)
    hit = trainer.episodes_to_reach(rates, 0.6)
    return math.inf if hit is None else hit


@pytest.mark.nightly
def test_criterion_10_ablation_ordering(nightly_only, verdict):
    t0 = time.perf_counter()
    results = {"full": [], "no-goal-condition": [], "no-dense-reward": []}
    for seed in (0, 1, 2):
        cfg = stage1_config(seed)
        cfg.trainer.stage1_early_stop = True
        tr = trainer.Trainer(cfg)
        trainer.train_stage1(cfg, tr)
        for name in results:
            results[name].append(episodes_to_60(tr.grasp, seed, name))
    med = {k: statistics.median(v) for k, v in results.items()}
    ok = med["full"] < med["no-goal-condition"] < med["no-dense-reward"]
    verdict(10, ok, f"episodes to 60% {results}, medians {med}", time.perf_counter() - t0, 4 * 3600)


def run_cli_twice(tmp_path, name, argv_for):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"{name}-{tag}"
        assert cli.main(argv_for(out)) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files]
    return files, same


def test_criterion_11_reproducibility(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    train_files, train_same = run_cli_twice(
        tmp_path, "train", lambda o: ["train", "--config", str(cfg), "--seed", "4", "--out", str(o)])
    full_files, full_same = run_cli_twice(
        tmp_path, "train64", lambda o: ["train", "--seed", "4", "--stage", "1", "--set", "trainer.stage1_episodes=6",
                                        "--out", str(o)])
    run = tmp_path / "train-a"
    eval_files, eval_same = run_cli_twice(
        tmp_path, "eval", lambda o: ["eval", "--config", str(cfg), "--checkpoint", str(run), "--suite", "random",
                                     "--n", "3", "--seed", "4", "--out", str(o)])
    n = len(train_same) + len(full_same) + len(eval_same)
    same = sum(train_same) + sum(full_same) + sum(eval_same)
    needed = {"grasp.ckpt", "push.ckpt", "curve_episodes.csv", "curve_actions.csv"} <= set(train_files) and \
        {"report.csv", "report.txt"} <= set(eval_files)
    verdict(11, needed and same == n, f"{same}/{n} output files byte-identical across reruns",
            time.perf_counter() - t0, 10 * 60)
