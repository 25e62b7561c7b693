import subprocess
import sys

import pytest

from pushgrasp import cli
from pushgrasp.scenefile import load_scene

from .helpers import block, scene_of

TINY = """\
world.grid_size = 32
world.workspace_size = 0.32
qfunc.channels = 8, 8
qfunc.dilations = 1, 2
trainer.stage1_objects_min = 3
trainer.stage1_objects_max = 3
trainer.stage1_episodes = 3
trainer.stage1_early_stop = false
trainer.stage2_objects = 3
trainer.stage2_drop_extent = 0.6
trainer.stage2_episodes = 2
trainer.stage3_objects = 3
trainer.stage3_push_episodes = 1
trainer.stage3_grasp_episodes = 1
agent.max_pushes = 2
eval.random_suite_objects = 3
eval.random_suite_cases = 2
eval.motion_cap = 6
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["train"]) == cli.EXIT_USAGE
    assert cli.main(["train", "--out", "x", "--stage", "7"]) == cli.EXIT_USAGE


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    assert cli.main(["train", "--config", str(missing), "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    assert cli.main(["train", "--set", "world.gravity=9.8", "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert "world.gravity" in capsys.readouterr().err


def test_train_is_deterministic(tiny, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert cli.main(["train", "--config", str(tiny), "--seed", "7", "--out", str(o)]) == 0
    names = ["curve_episodes.csv", "curve_actions.csv", "episodes.csv", "actions.csv", "config.txt",
             "grasp.ckpt", "push.ckpt", "stage1_grasp.ckpt"]
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    assert "trainer.seed = 7" in (outs[0] / "config.txt").read_text()


def test_train_stage2_requires_init(tiny, tmp_path):
    args = ["train", "--config", str(tiny), "--stage", "2", "--out", str(tmp_path / "o")]
    assert cli.main(args) == cli.EXIT_USAGE
    assert cli.main(args + ["--init", str(tmp_path / "none")]) == cli.EXIT_DATA


def test_no_dense_reward_ablation_logs_zero_rewards(tiny, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["train", "--config", str(tiny), "--stage", "1,2", "--ablation", "no-dense-reward",
                     "--out", str(out)]) == 0
    from pushgrasp.trainer import read_csv
    pushes = [r for r in read_csv(out / "actions.csv") if r["stage"] == "II" and r["kind"].startswith("push")]
    assert pushes and all(float(r["reward"]) == 0.0 for r in pushes)


def test_eval_q_policy_is_byte_stable(tiny, tmp_path, capsys):
    run = tmp_path / "run"
    assert cli.main(["train", "--config", str(tiny), "--stage", "1", "--out", str(run)]) == 0
    reports = []
    for d in ("e1", "e2"):
        assert cli.main(["eval", "--config", str(tiny), "--checkpoint", str(run), "--suite", "random",
                         "--n", "2", "--out", str(tmp_path / d)]) == 0
        reports.append((tmp_path / d / "report.csv").read_bytes())
    assert reports[0] == reports[1]
    assert "average" in capsys.readouterr().out


def test_eval_missing_checkpoint(tmp_path, capsys):
    assert cli.main(["eval", "--checkpoint", str(tmp_path / "none"), "--suite", "random",
                     "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert "CHECKPOINT-NOT-FOUND" in capsys.readouterr().err


def test_eval_heuristic_challenging_single_run(tmp_path, capsys):
    assert cli.main(["eval", "--policy", "heuristic", "--suite", "challenging", "--n", "1",
                     "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "report.txt").read_text()
    assert "cells: Completion / Grasp Success / Motion Number" in text
    assert text.splitlines()[-1].startswith("average")


def test_scene_gen_round_trip(tmp_path):
    p = tmp_path / "s.scene"
    assert cli.main(["scene", "gen", "--n", "10", "--seed", "3", "--out", str(p)]) == 0
    from pushgrasp.world import generate_random_scene
    assert load_scene(p) == generate_random_scene(10, 3)
    assert cli.main(["scene", "check", str(p)]) == 0


def test_scene_check_lists_overlapping_pair(tmp_path, capsys):
    from pushgrasp.scenefile import save_scene
    p = tmp_path / "bad.scene"
    save_scene(scene_of(block(0, 20, 20, 4, 4), block(3, 22, 20, 4, 4), block(5, 50, 50)), p)
    assert cli.main(["scene", "check", str(p)]) == cli.EXIT_DATA
    assert "overlap: objects 0 and 3" in capsys.readouterr().err


def test_scene_check_parse_error(tmp_path, capsys):
    p = tmp_path / "broken.scene"
    p.write_text("garbage\n")
    assert cli.main(["scene", "check", str(p)]) == cli.EXIT_DATA
    assert "line" in capsys.readouterr().err


def test_scene_preview_shows_encircled_goal(capsys):
    from importlib import resources
    path = resources.files("pushgrasp.data.challenging") / "05-encircle-pinwheel.scene"
    assert cli.main(["scene", "preview", str(path)]) == 0
    grid = capsys.readouterr().out.splitlines()[:64]
    rows = [i for i, line in enumerate(grid) if "#" in line]
    cols = [j for line in grid for j, ch in enumerate(line) if ch == "#"]
    r, c = (min(rows) + max(rows)) // 2, (min(cols) + max(cols)) // 2
    # every straight line out of the goal meets another object before the edge
    for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        i, j = r, c
        while 0 <= i < 64 and 0 <= j < 64 and grid[i][j] == "#":
            i, j = i + dr, j + dc
        hit = False
        while 0 <= i < 64 and 0 <= j < 64:
            if grid[i][j] not in (".", " ", "#"):
                hit = True
                break
            i, j = i + dr, j + dc
        assert hit


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pushgrasp", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "train" in res.stdout
