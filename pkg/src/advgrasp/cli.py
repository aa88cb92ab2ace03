"""Command-line interface.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime aborts
(an iteration that collects zero successful grasps).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiment, neural, policy, report, trainer
from .datasets import read_dataset, write_dataset
from .experiment import ConfigError, default_config_dict, load_config
from .grasp_sim import N_ANGLE_BINS, N_SHAKE_ACTIONS, N_SNATCH_ACTIONS
from .trainer import (Environment, ZeroSuccessfulGraspsError,
                      collect_random_grasps, collect_with_adversary,
                      derive_seed, joint_train, make_adversary_targets,
                      make_protagonist_targets, train_network)


def _env_from_config(args) -> tuple:
    cfg, candidates = load_config(args.config)
    train_objs, eval_objs = experiment._build_objects(cfg)
    return cfg, Environment(train_objs, cfg.sim, candidates), eval_objs


def _cmd_default_config(args) -> int:
    payload = json.dumps(default_config_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def _cmd_collect(args) -> int:
    cfg, env, _ = _env_from_config(args)
    if args.mode == "random":
        records = collect_random_grasps(env, args.n, args.seed)
    else:
        protagonist = neural.load_network(args.protagonist)
        adversary = neural.load_network(args.adversary) if args.adversary else None
        records = collect_with_adversary(
            env, protagonist, adversary, args.kind, args.n,
            policy.importance(1.0), policy.GREEDY, args.seed)
    write_dataset(records, args.out)
    succ = sum(r.grasp_success for r in records)
    print(f"wrote {len(records)} episodes ({succ} successful) to {args.out}")
    return 0


def _cmd_train_protagonist(args) -> int:
    cfg, env, _ = _env_from_config(args)
    records = []
    for path in args.data:
        records.extend(read_dataset(path))
    adversary = neural.load_network(args.adversary) if args.adversary else None
    samples = make_protagonist_targets(records, adversary, cfg.game.alpha,
                                       cfg.game.label_mode)
    if args.init:
        net = neural.load_network(args.init)
    else:
        net = neural.init_network(N_ANGLE_BINS, derive_seed(args.seed, "net"))
    net, stats = train_network(net, samples, None, cfg.game,
                               derive_seed(args.seed, "train"))
    neural.save_network(net, args.out)
    print(f"trained on {stats.n_samples} samples: epochs={stats.epochs} "
          f"accuracy={stats.accuracy:.3f} -> {args.out}")
    return 0


def _cmd_train_adversary(args) -> int:
    cfg, env, _ = _env_from_config(args)
    records = []
    for path in args.data:
        records.extend(read_dataset(path))
    samples = make_adversary_targets(records)
    if not samples:
        print("no adversary attempts in the given datasets", file=sys.stderr)
        return 3
    n_out = N_SHAKE_ACTIONS if args.kind == "shake" else N_SNATCH_ACTIONS
    if args.init:
        net = neural.load_network(args.init)
    else:
        net = neural.init_network(n_out, derive_seed(args.seed, "net"))
    net, stats = train_network(net, samples, None, cfg.game,
                               derive_seed(args.seed, "train"))
    neural.save_network(net, args.out)
    print(f"trained on {stats.n_samples} samples: epochs={stats.epochs} "
          f"accuracy={stats.accuracy:.3f} -> {args.out}")
    return 0


def _cmd_joint_train(args) -> int:
    cfg, env, _ = _env_from_config(args)
    kind = None if args.kind == "baseline" else args.kind
    result = joint_train(env, cfg.game, kind, derive_seed(args.seed, args.kind),
                         args.out, init_protagonist_path=args.init_protagonist,
                         resume=args.resume)
    print(f"{args.kind}: {len(result.protagonist_paths)} iterations, "
          f"{result.metrics['total_grasp_attempts']} grasp attempts -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg, env, eval_objs = _env_from_config(args)
    if args.regime not in cfg.regimes:
        raise ConfigError(f"eval_regimes.{args.regime} not defined in the config")
    net = neural.load_network(args.net)
    col = experiment.evaluate(net, eval_objs, cfg.regimes[args.regime], cfg.tries,
                              derive_seed(args.seed, "eval"), cfg.sim,
                              label=args.regime)
    payload = col.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(f"{args.regime}: overall {100.0 * col.overall:.1f}% over "
          f"{len(col.object_ids)} objects x {col.tries} tries")
    return 0


def _cmd_run_experiment(args) -> int:
    report_dir = experiment.run_experiment(args.config, args.out,
                                           resume=args.resume)
    print(f"report written to {report_dir}")
    return 0


def _cmd_report(args) -> int:
    report_dir = report.emit_report(args.out)
    print(f"report written to {report_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advgrasp",
        description="Adversarial self-supervised grasp learning, desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True, out=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config JSON")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="run seed")
        if out:
            p.add_argument("--out", required=True)

    p = sub.add_parser("default-config", help="print or write the default config")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_default_config)

    p = sub.add_parser("collect", help="collect an episode dataset")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--mode", choices=("random", "policy"), default="random")
    p.add_argument("--protagonist", help="checkpoint (policy mode)")
    p.add_argument("--adversary", help="checkpoint (optional)")
    p.add_argument("--kind", choices=("shake", "snatch"), default=None)
    p.set_defaults(fn=_cmd_collect)

    p = sub.add_parser("train-protagonist", help="train the grasp network")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--adversary", help="adversary checkpoint for soft labels")
    p.add_argument("--init", help="warm-start checkpoint")
    p.set_defaults(fn=_cmd_train_protagonist)

    p = sub.add_parser("train-adversary", help="train a shake/snatch network")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--kind", choices=("shake", "snatch"), required=True)
    p.add_argument("--init", help="warm-start checkpoint")
    p.set_defaults(fn=_cmd_train_adversary)

    p = sub.add_parser("joint-train", help="run one training arm")
    common(p)
    p.add_argument("--kind", choices=("baseline", "shake", "snatch"),
                   required=True)
    p.add_argument("--init-protagonist", help="checkpoint to start from (snatch)")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(fn=_cmd_joint_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on held-out objects")
    common(p, out=False)
    p.add_argument("--net", required=True)
    p.add_argument("--regime", default="low")
    p.add_argument("--out", default=None, help="optional JSON output")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("run-experiment", help="run all arms, seeds and the report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(fn=_cmd_run_experiment)

    p = sub.add_parser("report", help="regenerate tables and plots")
    p.add_argument("--out", required=True, help="experiment directory")
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ZeroSuccessfulGraspsError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
