"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (bad config, scene,
checkpoint), 3 internal error.
"""
from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import evalkit, percept, qfunc, trainer
from .agent import QAgent
from .config import ABLATIONS, Config, apply_ablation, dump_config, load_config
from .errors import CheckpointNotFound, ConfigError, PushGraspError
from .geometry import inside_bounds
from .percept import n_input_channels
from .scenefile import format_scene, load_scene, save_scene
from .world import generate_random_scene, scene_overlaps

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
SUITES = ("random", "challenging", "goal-agnostic", "height")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args) -> Config:
    overrides = _parse_sets(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("trainer.seed", str(args.seed))
        overrides.setdefault("eval.seed", str(args.seed))
    cfg = load_config(args.config, overrides)
    if getattr(args, "ablation", None):
        cfg = apply_ablation(cfg, args.ablation)
    return cfg


def _run_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_stages(text: str):
    if text == "all":
        return (1, 2, 3)
    try:
        stages = tuple(sorted({int(s) for s in text.split(",")}))
    except ValueError:
        raise UsageError(f"--stage expects 1, 2, 3, a comma list or 'all', got {text!r}") from None
    if not stages or any(s not in (1, 2, 3) for s in stages):
        raise UsageError(f"--stage expects values in 1..3, got {text!r}")
    return stages


def _load_net(directory: Path, name: str, cfg: Config):
    path = directory / name
    if not path.is_file():
        raise CheckpointNotFound(f"checkpoint not found: {path}")
    return qfunc.load_checkpoint(path, cfg.world.grid_size, n_input_channels(cfg.percept))


def cmd_train(args) -> int:
    cfg = _config(args)
    stages = _parse_stages(args.stage)
    out = _run_dir(args.out)
    (out / "config.txt").write_text(dump_config(cfg))
    tr = trainer.Trainer(cfg)
    if stages[0] > 1:
        if args.init is None:
            raise UsageError("--init DIR with grasp.ckpt (and push.ckpt for stage 3) is required "
                             "when stage 1 is skipped")
        init = Path(args.init)
        tr.grasp = _load_net(init, "grasp.ckpt", cfg)
        if stages[0] == 3:
            tr.push = _load_net(init, "push.ckpt", cfg)
        thr = init / "threshold.txt"
        if thr.is_file():
            tr.threshold = float(thr.read_text())
    trainer.train_all(cfg, out, stages, tr)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    out = _run_dir(args.out)
    (out / "config.txt").write_text(dump_config(cfg))
    if args.policy == "heuristic":
        policy = evalkit.HeuristicPolicy(cfg)
    else:
        if args.checkpoint is None:
            raise UsageError("--checkpoint DIR is required with --policy q")
        ck = Path(args.checkpoint)
        if not ck.is_dir():
            raise CheckpointNotFound(f"checkpoint directory not found: {ck}")
        grasp = _load_net(ck, "grasp.ckpt", cfg)
        push = _load_net(ck, "push.ckpt", cfg)
        thr_file = ck / "threshold.txt"
        thr = float(thr_file.read_text()) if thr_file.is_file() else None
        policy = evalkit.QPolicy(QAgent(grasp, push, cfg), thr)
    cases = evalkit.build_suite(args.suite, cfg)
    if args.suite == "goal-agnostic":
        report, _ = evalkit.goal_agnostic_eval(cases, policy, cfg, args.n)
    else:
        report = evalkit.run_test(cases, policy, cfg, args.n, suite=args.suite)
    evalkit.emit_report(report, out / "report")
    sys.stdout.write(evalkit.report_table(report))
    return EXIT_OK


def cmd_scene(args) -> int:
    if args.scene_cmd == "gen":
        cfg = _config(args)
        scene = generate_random_scene(args.n, args.seed if args.seed is not None else 0,
                                      cfg.shapes, cfg.world, args.drop_extent)
        if args.out:
            save_scene(scene, args.out)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(format_scene(scene))
        return EXIT_OK
    scene = load_scene(args.path)
    if args.scene_cmd == "check":
        problems = [f"overlap: objects {a} and {b}" for a, b in scene_overlaps(scene)]
        bounds = scene.workspace.bounds
        problems += [f"out of bounds: object {o.object_id}" for o in scene.objects
                     if not inside_bounds(o.footprint(), bounds)]
        if problems:
            for p in problems:
                print(p, file=sys.stderr)
            return EXIT_DATA
        print(f"ok: {len(scene)} objects, goal {scene.goal_id}")
        return EXIT_OK
    print(percept.ascii_preview(percept.render(scene, Config().world)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pushgrasp", description="Goal-oriented push-grasp learning on a 2D tabletop.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="config file (section.key = value lines)")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    t = sub.add_parser("train", help="run training stages")
    common(t)
    t.add_argument("--stage", default="all", help="1, 2, 3, comma list, or all")
    t.add_argument("--ablation", choices=sorted(ABLATIONS))
    t.add_argument("--init", help="directory with checkpoints to start from")
    t.add_argument("--out", required=True, help="run directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a policy on a test suite")
    common(e)
    e.add_argument("--checkpoint", help="run directory holding grasp.ckpt and push.ckpt")
    e.add_argument("--policy", choices=("q", "heuristic"), default="q")
    e.add_argument("--suite", choices=SUITES, required=True)
    e.add_argument("--n", type=int, help="runs per case")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("scene", help="generate, validate or preview scene files")
    ssub = s.add_subparsers(dest="scene_cmd", parser_class=_Parser)
    g = ssub.add_parser("gen")
    common(g)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--drop-extent", type=float, default=1.0)
    g.add_argument("--out")
    for name in ("check", "preview"):
        sp = ssub.add_parser(name)
        sp.add_argument("path")
    s.set_defaults(func=cmd_scene)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None or (args.command == "scene" and args.scene_cmd is None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PushGraspError, ConfigError) as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error [IO]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
