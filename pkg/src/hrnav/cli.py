"""Command-line entry point: train, eval, plot, bench, inspect-checkpoint.

Exit codes: 0 success, 2 configuration error, 3 runtime or non-finite
training error, 4 I/O or checkpoint error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agents import ScheduleError
from .benchmarks import PolicyBundle, comparison_table, evaluate, scripted_bundle
from .config import OUTPUT_ENV_VAR, ConfigError, RunConfig, apply_overrides, load_config, output_dir, resolve_world
from .hierarchy import Trainer
from .neuralnet import CheckpointError, NonFiniteError, read_checkpoint_header
from .plotting import LogFormatError, loss_chart, read_log, reward_chart
from .simworld import WorldFormatError, WorldValidationError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _out(args, default: str) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    return Path(os.environ.get(OUTPUT_ENV_VAR) or default)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def build_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    sets = list(args.set or [])
    for flag, key in (("mode", "train.mode"), ("episodes", "episodes"), ("seed", "seed"),
                      ("training_mode", "hierarchy.training_mode"), ("max_steps", "env.max_steps"),
                      ("checkpoint_every", "checkpoint_every"), ("flat_reward", "train.flat_reward")):
        value = getattr(args, flag)
        if value is not None:
            sets.insert(0, f"{key}={json.dumps(value)}")
    if args.world:
        sets.insert(0, f"worlds={json.dumps(args.world)}")
    if args.output_dir:
        sets.insert(0, f"output_dir={json.dumps(args.output_dir)}")
    return apply_overrides(cfg, sets) if sets else cfg


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    worlds = cfg.load_worlds()
    out = output_dir(cfg)
    log = out / "train_log.csv"
    if log.exists() and not args.overwrite:
        raise FileExistsError(f"{log} already exists; pass --overwrite or choose another output directory")
    out.mkdir(parents=True, exist_ok=True)
    if log.exists():
        log.unlink()
    _write(out / "config.json", cfg.to_json())
    trainer = Trainer(worlds, seed=cfg.seed, total_episodes=cfg.episodes, **cfg.trainer_kwargs())
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)

    def progress(rec, row):
        if not args.quiet and (row["episode"] + 1) % 50 == 0:
            print(f"episode {row['episode'] + 1}/{cfg.episodes} steps={row['steps']} outcome={row['outcome']} "
                  f"reward={row['ep_reward_low']:.2f}", flush=True)

    trainer.train(cfg.episodes, log_path=log, checkpoint_dir=ckpt_dir, checkpoint_every=cfg.checkpoint_every,
                  progress=progress)
    trainer.save(ckpt_dir / "final.bin")
    print(f"wrote {log} and {ckpt_dir / 'final.bin'}")
    return EXIT_OK


def _eval_worlds(args):
    return [resolve_world(w) for w in (args.world or ["empty"])]


def cmd_eval(args) -> int:
    bundle = PolicyBundle.from_checkpoint(args.checkpoint)
    if args.random_high:
        if bundle.flat:
            raise ConfigError("--random-high needs a hierarchical checkpoint")
        bundle = bundle.with_random_high()
    report = evaluate(bundle, _eval_worlds(args), args.episodes, args.seed, astar_resolution=args.astar_resolution)
    out = _out(args, "runs/eval")
    _write(out / "eval_report.csv", report.to_csv())
    _write(out / "eval_summary.txt", report.summary_text())
    sys.stdout.write(report.summary_text())
    return EXIT_OK


def cmd_plot(args) -> int:
    out = _out(args, "runs/plots")
    stems = [Path(p).stem for p in args.logs]
    for path in args.logs:
        cols = read_log(Path(path).read_text())
        stem = Path(path).stem
        if stems.count(stem) > 1:
            # logs from different runs usually share a file name; tell them apart by run directory
            stem = f"{Path(path).resolve().parent.name}_{stem}"
        _write(out / f"{stem}_reward.svg", reward_chart(cols, args.window))
        try:
            _write(out / f"{stem}_loss.svg", loss_chart(cols, args.window))
        except LogFormatError:
            print(f"{path}: no loss values, skipped the loss chart")
        print(f"wrote plots for {path} to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    bundles = []
    for entry in args.checkpoint or []:
        name, _, path = entry.rpartition("=")
        bundle = PolicyBundle.from_checkpoint(path, name or Path(path).stem)
        bundles.append(bundle)
        if args.ablation and not bundle.flat:
            bundles.append(bundle.with_random_high())
    env_config = bundles[0].env_config if bundles else None
    for kind in args.scripted or []:
        bundles.append(scripted_bundle(kind, env_config))
    if not bundles:
        raise ConfigError("bench needs at least one --checkpoint or --scripted configuration")
    worlds = _eval_worlds(args)
    reports = [evaluate(b, worlds, args.episodes, args.seed, astar_resolution=args.astar_resolution)
               for b in bundles]
    out = _out(args, "runs/bench")
    csv_text, table = comparison_table(reports)
    _write(out / "bench.csv", csv_text)
    _write(out / "bench.txt", table)
    for i, rep in enumerate(reports):
        _write(out / f"report_{i:02d}_{rep.name.replace('/', '_')}.csv", rep.to_csv())
    sys.stdout.write(table)
    return EXIT_OK


def cmd_inspect(args) -> int:
    header, _ = read_checkpoint_header(Path(args.checkpoint).read_bytes())
    print(json.dumps(header, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hrnav", description="Hierarchical DQN+TD3 navigation in a 2-D arena.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a flat TD3 or hierarchical agent")
    t.add_argument("--config", help="JSON run config")
    t.add_argument("--mode", choices=["td3", "hierarchy"])
    t.add_argument("--world", action="append", help="bundled world name or .world file (repeatable)")
    t.add_argument("--episodes", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--output-dir")
    t.add_argument("--training-mode", choices=["joint", "alternating", "frozen_high", "frozen_low"])
    t.add_argument("--max-steps", type=int)
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--flat-reward", choices=["env", "low"])
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field, e.g. td3.actor_lr=3e-4")
    t.add_argument("--overwrite", action="store_true", help="replace an existing log in the output directory")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint with greedy policies")
    e.add_argument("checkpoint")
    e.add_argument("--world", action="append")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=12345)
    e.add_argument("--output-dir")
    e.add_argument("--astar-resolution", type=float, default=0.0, help="0 disables the A* efficiency column")
    e.add_argument("--random-high", action="store_true", help="replace the high level with random subgoals")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="SVG reward and loss curves from training logs")
    pl.add_argument("logs", nargs="+")
    pl.add_argument("--window", type=int, default=100)
    pl.add_argument("--output-dir")
    pl.set_defaults(func=cmd_plot)

    b = sub.add_parser("bench", help="side-by-side metrics for several configurations")
    b.add_argument("--checkpoint", action="append", metavar="[NAME=]PATH")
    b.add_argument("--scripted", action="append", choices=["straight", "random"])
    b.add_argument("--ablation", action="store_true", help="add a random-high-level variant of each hierarchy")
    b.add_argument("--world", action="append")
    b.add_argument("--episodes", type=int, default=100)
    b.add_argument("--seed", type=int, default=12345)
    b.add_argument("--astar-resolution", type=float, default=0.1)
    b.add_argument("--output-dir")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect-checkpoint", help="print a checkpoint header")
    i.add_argument("checkpoint")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, WorldFormatError, WorldValidationError, LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteError, ScheduleError) as exc:
        print(f"error: training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
