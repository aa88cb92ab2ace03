"""Experiment orchestration: config parsing, the held-out evaluation
protocol, the three training arms at matched budgets, and resumable runs.

An experiment directory looks like

    out/
      config.json                  resolved configuration snapshot
      state.json                   completed top-level stages
      <arm>/seed-<s>/...           joint_train artifacts (datasets, ckpts)
      <arm>/seed-<s>/evals.json    per-iteration evaluation columns
      report/                      tables, plots, summary

Every stage derives its randomness from (experiment seed, stage name), so
an interrupted run resumed with --resume reproduces the uninterrupted run
byte for byte.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grasp_sim, neural, policy, scene as scene_mod, shapes, trainer
from .grasp_sim import SimConfig
from .scene import ObjectShape, Scene
from .trainer import (Environment, GameConfig, derive_seed, joint_train,
                      _Stages, _read_json, _write_json)


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


@dataclass(frozen=True)
class EvalRegime:
    name: str
    grip_force: float
    patches: int
    friction_scale: float = 1.0


DEFAULT_REGIMES = {
    "low": EvalRegime("low", 7.0, 128, 1.0),
    "high": EvalRegime("high", 35.0, 1280, 1.25),
}

KNOWN_ARMS = ("baseline", "shake", "shake_snatch")


@dataclass
class ExperimentConfig:
    name: str
    seeds: list
    objects: dict                 # {"train": {...counts, seed_base}, "eval": {...}}
    tries: int
    arms: list
    regimes: dict                 # name -> EvalRegime
    game: GameConfig
    sim: SimConfig

    def train_counts(self) -> dict:
        return {k: v for k, v in self.objects["train"].items() if k != "seed_base"}

    def eval_counts(self) -> dict:
        return {k: v for k, v in self.objects["eval"].items() if k != "seed_base"}


def default_config_dict() -> dict:
    return {
        "name": "desk-scale-comparison",
        "seeds": [101, 202, 303],
        "objects": {
            "train": {"easy": 20, "medium": 16, "hard": 4, "seed_base": 1000},
            "eval": {"easy": 4, "medium": 4, "hard": 2, "seed_base": 9000},
        },
        "tries": 10,
        "arms": ["baseline", "shake", "shake_snatch"],
        "eval_regimes": {
            "low": {"grip_force": 7.0, "patches": 128, "friction_scale": 1.0},
            "high": {"grip_force": 35.0, "patches": 1280, "friction_scale": 1.25},
        },
        "game": {
            "alpha": 0.8,
            "iterations": {"shake": 3, "snatch": 2},
            "grasps_per_iteration": 600,
            "init_random_grasps": 2000,
            "max_epochs": 50,
            "train_accuracy_threshold": 0.75,
            "accuracy_mode": "per_head",
            "label_mode": "belief",
            "batch_size": 64,
            "learning_rate": 1e-3,
            "probe_successes": 200,
            "baseline_budget_multiplier": 1.3,
            "candidates_per_image": 128,
        },
        "sim": {
            "grip_force": 7.0, "max_payload": 2.2, "w_max": 0.06,
            "shake_freq": 2.0, "shake_amp": 0.025, "lever_gain": 20.0,
            "pull_force": 10.0, "clearance": 0.01,
        },
    }


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing key {context}{key}")
    return mapping[key]


def parse_config(raw: dict) -> tuple:
    """Validate a config dict; returns (ExperimentConfig, candidates_per_image)."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    name = _require(raw, "name", "")
    seeds = _require(raw, "seeds", "")
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers")

    objects = _require(raw, "objects", "")
    for side in ("train", "eval"):
        spec = _require(objects, side, "objects.")
        _require(spec, "seed_base", f"objects.{side}.")
        for diff in shapes.DIFFICULTIES:
            if spec.get(diff, 0) < 0:
                raise ConfigError(f"objects.{side}.{diff} must be >= 0")
        if sum(spec.get(d, 0) for d in shapes.DIFFICULTIES) < 1:
            raise ConfigError(f"objects.{side} needs at least one object")
    n_train = sum(objects["train"].get(d, 0) for d in shapes.DIFFICULTIES)
    n_eval = sum(objects["eval"].get(d, 0) for d in shapes.DIFFICULTIES)
    train_range = set(range(objects["train"]["seed_base"],
                            objects["train"]["seed_base"] + n_train))
    eval_range = set(range(objects["eval"]["seed_base"],
                           objects["eval"]["seed_base"] + n_eval))
    if train_range & eval_range:
        raise ConfigError("objects.eval.seed_base overlaps the training object "
                          "seeds; evaluation objects must be novel")

    tries = _require(raw, "tries", "")
    if not isinstance(tries, int) or tries < 1:
        raise ConfigError("tries must be a positive integer")

    arms = _require(raw, "arms", "")
    for arm in arms:
        if arm not in KNOWN_ARMS:
            raise ConfigError(f"arms: unknown arm {arm!r}, expected {KNOWN_ARMS}")
    if "shake_snatch" in arms and "shake" not in arms:
        raise ConfigError("arms: shake_snatch requires the shake arm")

    regimes_raw = _require(raw, "eval_regimes", "")
    regimes = {}
    for rname, spec in regimes_raw.items():
        regimes[rname] = EvalRegime(
            rname,
            _require(spec, "grip_force", f"eval_regimes.{rname}."),
            _require(spec, "patches", f"eval_regimes.{rname}."),
            spec.get("friction_scale", 1.0),
        )
        if regimes[rname].patches < 1:
            raise ConfigError(f"eval_regimes.{rname}.patches must be >= 1")

    game_raw = dict(_require(raw, "game", ""))
    candidates = game_raw.pop("candidates_per_image", 128)
    try:
        game = GameConfig(**game_raw)
        game.validate()
    except TypeError as exc:
        raise ConfigError(f"game: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sim_raw = _require(raw, "sim", "")
    try:
        sim = SimConfig(**sim_raw)
        sim.validate()
    except TypeError as exc:
        raise ConfigError(f"sim: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    cfg = ExperimentConfig(name, seeds, objects, tries, list(arms), regimes,
                           game, sim)
    return cfg, candidates


def load_config(path: str) -> tuple:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    return parse_config(raw)


# ---------------------------------------------------------------------------
# evaluation


def _scaled_object(obj: ObjectShape, friction_scale: float) -> ObjectShape:
    if friction_scale == 1.0:
        return obj
    return ObjectShape(obj.vertices, obj.mass,
                       min(1.0, obj.friction_mu * friction_scale), obj.com, obj.id)


def _pose_for(obj: ObjectShape, rng: np.random.Generator) -> tuple:
    phi = float(rng.uniform(0.0, 2.0 * math.pi))
    from . import geometry
    rotated = obj.vertices @ geometry.rotation_matrix(phi).T
    lo = rotated.min(axis=0)
    hi = rotated.max(axis=0)
    x = float(rng.uniform(-lo[0], scene_mod.WORKSPACE_SIZE - hi[0]))
    y = float(rng.uniform(-lo[1], scene_mod.WORKSPACE_SIZE - hi[1]))
    return (x, y, phi)


@dataclass
class EvalColumn:
    label: str
    object_ids: list
    successes: list               # per object, out of `tries`
    tries: int

    @property
    def overall(self) -> float:
        return sum(self.successes) / (len(self.successes) * self.tries)

    def to_dict(self) -> dict:
        return {"label": self.label, "object_ids": self.object_ids,
                "successes": self.successes, "tries": self.tries,
                "overall": self.overall}


# the report counts a grasp only if it survives being hoisted off the table;
# the hoist acceleration equals the gentlest shake (severity floor 0.25), so
# "successful yet unstable" holds pass collection but fail the report
_LIFT_ACTION_INDEX = 2      # orientation 0, vertical direction: severity 0.25


def lift_holds(outcome, obj, eval_sim: SimConfig) -> bool:
    """Strict reported-lift check: the friction hold at this margin must
    exceed the gentle-hoist demand. Monotone in grip force per grasp."""
    demand = grasp_sim.shake_demand(outcome, obj, eval_sim, _LIFT_ACTION_INDEX)
    return demand <= grasp_sim.hold_strength(outcome, obj, eval_sim)


def evaluate(net: neural.NetworkParams, objects: list, regime: EvalRegime,
             tries: int, rng_seed: int, sim: SimConfig,
             label: str = "") -> EvalColumn:
    """Greedy grasps on re-randomized poses of held-out objects.

    A try counts only if the grasp succeeds and then holds the object's
    weight at the regime's grip force (the lift report). Pose and candidate
    streams are keyed by (seed, object id, try) only, so columns for
    different arms, iterations and regimes face identical scenes; the high
    regime extends the low regime's candidate draw.
    """
    eval_sim = replace(sim, grip_force=regime.grip_force)
    successes = []
    for obj in objects:
        scaled = _scaled_object(obj, regime.friction_scale)
        hits = 0
        for t in range(tries):
            pose_rng = np.random.default_rng(derive_seed(rng_seed, "pose", obj.id, t))
            pose = _pose_for(scaled, pose_rng)
            scene = Scene(scaled, pose, seed=derive_seed(rng_seed, "scene", obj.id, t))
            image = scene_mod.render_scene(scene)
            cands = policy.sample_candidates(
                image, regime.patches, derive_seed(rng_seed, "cands", obj.id, t))
            matrix = policy.probability_matrix(net, image, cands)
            grasp = policy.select_grasp(matrix, policy.GREEDY, 0)
            outcome = grasp_sim.grasp_margin(scaled, pose, grasp, eval_sim)
            hits += outcome.success and lift_holds(outcome, scaled, eval_sim)
        successes.append(hits)
    return EvalColumn(label, [o.id for o in objects], successes, tries)


# ---------------------------------------------------------------------------
# the full experiment


def _build_objects(cfg: ExperimentConfig) -> tuple:
    train = shapes.generate_object_set(cfg.objects["train"]["seed_base"],
                                       cfg.train_counts())
    evals = shapes.generate_object_set(cfg.objects["eval"]["seed_base"],
                                       cfg.eval_counts())
    return train, evals


def _arm_dir(out_dir: str, arm: str, seed: int) -> str:
    return os.path.join(out_dir, arm, f"seed-{seed}")


def _run_arm(cfg: ExperimentConfig, candidates: int, out_dir: str, arm: str,
             seed: int, resume: bool) -> None:
    started = time.monotonic()
    train_objs, eval_objs = _build_objects(cfg)
    env = Environment(train_objs, cfg.sim, candidates)
    arm_dir = _arm_dir(out_dir, arm, seed)
    os.makedirs(arm_dir, exist_ok=True)

    if arm == "baseline":
        result = joint_train(env, cfg.game, None, derive_seed(seed, "baseline"),
                             arm_dir, resume=resume)
    elif arm == "shake":
        result = joint_train(env, cfg.game, "shake", derive_seed(seed, "shake"),
                             arm_dir, resume=resume)
    else:   # shake_snatch: continue from the shake arm's final protagonist
        shake_dir = _arm_dir(out_dir, "shake", seed)
        shake_iters = cfg.game.iterations["shake"]
        init_ckpt = os.path.join(shake_dir, f"iter-{shake_iters - 1}",
                                 "protagonist.ckpt")
        if not os.path.exists(init_ckpt):
            raise RuntimeError(f"{arm}: missing shake checkpoint {init_ckpt}")
        result = joint_train(env, cfg.game, "snatch", derive_seed(seed, "snatch"),
                             arm_dir, init_protagonist_path=init_ckpt,
                             resume=resume)

    # evaluations: low regime per iteration, high regime on the final net
    stages = _Stages(arm_dir, resume=True)   # joint_train already owns this file

    def do_eval():
        evals = {"low": {}, "high": {}}
        eval_seed = derive_seed(seed, "eval")
        for k, ckpt in enumerate(result.protagonist_paths):
            net = neural.load_network(ckpt)
            col = evaluate(net, eval_objs, cfg.regimes["low"], cfg.tries,
                           eval_seed, cfg.sim, label=f"{arm}-iter{k}")
            evals["low"][f"iter-{k}"] = col.to_dict()
        final = neural.load_network(result.protagonist_paths[-1])
        if "high" in cfg.regimes:
            col = evaluate(final, eval_objs, cfg.regimes["high"], cfg.tries,
                           eval_seed, cfg.sim, label=f"{arm}-final")
            evals["high"]["final"] = col.to_dict()
        _write_json(os.path.join(arm_dir, "evals.json"), evals)

    stages.run("evaluate", do_eval)
    _write_json(os.path.join(arm_dir, "runtime.json"),
                {"seconds": time.monotonic() - started})


def run_experiment(config_path: str, out_dir: str, resume: bool = False) -> str:
    """Run every arm and seed, then write the report. Returns the report dir."""
    cfg, candidates = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)

    snapshot = os.path.join(out_dir, "config.json")
    if os.path.exists(snapshot) and not resume:
        raise ConfigError(f"{out_dir} already holds an experiment; "
                          "pass resume to continue it")
    with open(config_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    _write_json(snapshot, raw)

    # snatch continues from shake, so order arms accordingly
    ordered = [a for a in ("baseline", "shake", "shake_snatch") if a in cfg.arms]
    for seed in cfg.seeds:
        for arm in ordered:
            _run_arm(cfg, candidates, out_dir, arm, seed, resume)

    from . import report
    return report.emit_report(out_dir)
