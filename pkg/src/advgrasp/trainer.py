"""The adversarial training loop: protagonist initialization, adversary
initialization, soft-label construction, and iterated joint batch training.

Every run writes its datasets, checkpoints, emitted training targets and
metrics into an artifact directory, stage by stage; a stage reads all of its
inputs from disk and derived seeds, so resuming an interrupted run and
running uninterrupted execute the exact same computations.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry, grasp_sim, neural, policy, scene as scene_mod
from .datasets import read_dataset, write_dataset
from .grasp_sim import (AdversaryAction, EpisodeRecord, GraspAction,
                        N_SHAKE_ACTIONS, N_SNATCH_ACTIONS, SimConfig)
from .neural import NetworkParams, OptState, TrainingSample
from .policy import GREEDY, UNIFORM, ProbMatrix, SelectionMode, importance
from .scene import ObjectShape, Scene


class ZeroSuccessfulGraspsError(RuntimeError):
    """An iteration collected no successful grasps; the simulator or policy
    is mis-tuned and continuing would train on an empty adversary set."""


def derive_seed(*parts) -> int:
    """Stable 63-bit stream seed from arbitrary labeled parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class Environment:
    """Object pool plus simulator settings used for data collection."""

    objects: list
    sim: SimConfig
    candidates_per_image: int = 128

    def config_id(self) -> str:
        blob = json.dumps({
            "sim": self.sim.__dict__,
            "objects": [o.id for o in self.objects],
            "candidates": self.candidates_per_image,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def scene_from_seed(env: Environment, scene_seed: int) -> Scene:
    """Deterministic scene: uniform object pick, pose uniform inside the
    workspace (accounting for the rotated extent)."""
    rng = np.random.default_rng(scene_seed)
    obj = env.objects[int(rng.integers(len(env.objects)))]
    phi = float(rng.uniform(0.0, 2.0 * math.pi))
    rotated = obj.vertices @ geometry.rotation_matrix(phi).T
    lo = rotated.min(axis=0)
    hi = rotated.max(axis=0)
    x = float(rng.uniform(-lo[0], scene_mod.WORKSPACE_SIZE - hi[0]))
    y = float(rng.uniform(-lo[1], scene_mod.WORKSPACE_SIZE - hi[1]))
    return Scene(obj, (x, y, phi), seed=scene_seed)


@dataclass
class GameConfig:
    alpha: float = 0.8
    iterations: dict = field(default_factory=lambda: {"shake": 3, "snatch": 2})
    grasps_per_iteration: int = 600
    init_random_grasps: int = 2000
    max_epochs: int = 50
    train_accuracy_threshold: float = 0.75
    accuracy_mode: str = "per_head"    # "per_head" | "balanced" | "plain"
    label_mode: str = "belief"         # "belief" (soft) | "outcome"
    batch_size: int = 64
    learning_rate: float = 1e-3
    probe_successes: int = 200
    baseline_budget_multiplier: float = 1.3

    def validate(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"game.alpha must be in [0, 1], got {self.alpha}")
        if self.accuracy_mode not in ("per_head", "balanced", "plain"):
            raise ValueError(f"game.accuracy_mode {self.accuracy_mode!r} unknown")
        if self.label_mode not in ("belief", "outcome"):
            raise ValueError(f"game.label_mode {self.label_mode!r} unknown")
        for key in ("grasps_per_iteration", "init_random_grasps", "max_epochs",
                    "batch_size", "probe_successes"):
            if getattr(self, key) < 1:
                raise ValueError(f"game.{key} must be >= 1")


# ---------------------------------------------------------------------------
# collection


def _run_one(env: Environment, scene: Scene, image, grasp: GraspAction,
             adversary: Optional[AdversaryAction], iteration: int,
             config_id: str, rng_seed: int) -> EpisodeRecord:
    return grasp_sim.run_episode(scene, grasp, adversary, env.sim,
                                 rng_seed=rng_seed, iteration=iteration,
                                 config_id=config_id, image=image)


def collect_random_grasps(env: Environment, n: int, rng_seed: int,
                          iteration: int = 0) -> list:
    """n episodes with uniformly random grasps over sampled candidates."""
    if n < 1:
        raise ValueError("need n >= 1 episodes")
    config_id = env.config_id()
    records = []
    for i in range(n):
        scene = scene_from_seed(env, derive_seed(rng_seed, "scene", i))
        image = scene_mod.render_scene(scene)
        cands = policy.sample_candidates(image, env.candidates_per_image,
                                         derive_seed(rng_seed, "cands", i))
        dummy = ProbMatrix(np.full((len(cands), grasp_sim.N_ANGLE_BINS), 0.5), cands)
        grasp = policy.select_grasp(dummy, UNIFORM, derive_seed(rng_seed, "pick", i))
        records.append(_run_one(env, scene, image, grasp, None, iteration,
                                config_id, derive_seed(rng_seed, "ep", i)))
    return records


def collect_with_adversary(env: Environment, protagonist: NetworkParams,
                           adversary: Optional[NetworkParams], kind: Optional[str],
                           n: int, grasp_mode: SelectionMode,
                           adversary_mode: SelectionMode, rng_seed: int,
                           iteration: int = 0) -> list:
    """n policy-driven episodes; on success the adversary (or a random
    action when no adversary network is given) perturbs the grasp.

    kind=None collects a pure grasp dataset for the no-adversary baseline.
    """
    if n < 1:
        raise ValueError("need n >= 1 episodes")
    config_id = env.config_id()
    n_actions = {None: 0, "shake": N_SHAKE_ACTIONS, "snatch": N_SNATCH_ACTIONS}[kind]
    records = []
    for i in range(n):
        scene = scene_from_seed(env, derive_seed(rng_seed, "scene", i))
        image = scene_mod.render_scene(scene)
        cands = policy.sample_candidates(image, env.candidates_per_image,
                                         derive_seed(rng_seed, "cands", i))
        matrix = policy.probability_matrix(protagonist, image, cands)
        grasp = policy.select_grasp(matrix, grasp_mode, derive_seed(rng_seed, "pick", i))

        action = None
        if kind is not None:
            outcome = grasp_sim.grasp_margin(scene.object, scene.pose, grasp, env.sim)
            if grasp_sim.static_hold(outcome, scene.object, env.sim):
                rpatch = scene_mod.extract_rotated_patch(
                    image, (grasp.x, grasp.y), grasp.angle)
                mode = adversary_mode if adversary is not None else UNIFORM
                action = policy.select_adversary(adversary, rpatch, n_actions,
                                                 mode, derive_seed(rng_seed, "adv", i))
        records.append(_run_one(env, scene, image, grasp, action, iteration,
                                config_id, derive_seed(rng_seed, "ep", i)))
    return records


# ---------------------------------------------------------------------------
# training targets


def _adversary_max_probs(adversary: NetworkParams, patches: list) -> np.ndarray:
    """Max predicted dislodge probability per rotated patch, fixed chunking
    so recomputation reproduces values bit for bit."""
    out = np.empty(len(patches), dtype=np.float64)
    for start in range(0, len(patches), 256):
        chunk = patches[start:start + 256]
        probs = neural.forward(adversary, np.stack([p.pixels for p in chunk]))
        out[start:start + 256] = probs.max(axis=1)
    return out


def make_protagonist_targets(records: list, adversary_net: Optional[NetworkParams],
                             alpha: float, label_mode: str = "belief") -> list:
    """Grasp-learner samples: 0 for failures, 1 for plain successes, and
    1 - alpha * (adversary's max predicted dislodge probability) for
    successes judged by an adversary network.

    label_mode="outcome" substitutes the realized adversary outcome for the
    belief (an exploratory variant, not the default formulation).
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    samples = []
    success_idx = [i for i, r in enumerate(records) if r.grasp_success]
    soft = None
    if adversary_net is not None and label_mode == "belief" and success_idx:
        soft = _adversary_max_probs(adversary_net,
                                    [records[i].rotated_patch for i in success_idx])
    soft_pos = {ri: k for k, ri in enumerate(success_idx)}
    for i, rec in enumerate(records):
        if not rec.grasp_success:
            value = 0.0
        elif adversary_net is None:
            value = 1.0
        elif label_mode == "belief":
            value = 1.0 - alpha * float(soft[soft_pos[i]])
        else:
            value = 1.0 - alpha * (1.0 if rec.adversary_success else 0.0)
        samples.append(TrainingSample(rec.grasp_patch.pixels, rec.grasp.theta_bin,
                                      value))
    return samples


def make_adversary_targets(records: list) -> list:
    """Adversary samples from records that carry an adversary attempt:
    rotated patch in, 1 for a dislodge, 0 for a survived grasp."""
    samples = []
    for rec in records:
        if rec.adversary_action is None:
            continue
        samples.append(TrainingSample(rec.rotated_patch.pixels,
                                      rec.adversary_action,
                                      1.0 if rec.adversary_success else 0.0))
    return samples


# ---------------------------------------------------------------------------
# network training


@dataclass
class TrainStats:
    epochs: int
    accuracy: float
    loss: float
    n_samples: int


def _balanced(hit: np.ndarray, labels: np.ndarray) -> float:
    rates = [float(hit[labels == cls].mean()) for cls in (False, True)
             if np.any(labels == cls)]
    return float(np.mean(rates))


def _accuracy(net: NetworkParams, pixels: np.ndarray, idx: np.ndarray,
              targets: np.ndarray, mode: str) -> float:
    """Train accuracy at threshold 0.5 against binarized targets.

    plain: fraction correct. balanced: mean of the two class rates.
    per_head: the supervised outputs form one binary problem per action
    head; this is the minimum balanced accuracy over heads with enough
    samples, so the stop rule demands discrimination in every head.
    """
    preds = np.empty(len(pixels), dtype=np.float64)
    for start in range(0, len(pixels), 1024):
        sl = slice(start, start + 1024)
        probs = neural.forward(net, pixels[sl])
        preds[sl] = probs[np.arange(len(probs)), idx[sl]]
    hit = (preds >= 0.5) == (targets >= 0.5)
    labels = targets >= 0.5
    if mode == "plain":
        return float(hit.mean())
    if mode == "balanced":
        return _balanced(hit, labels)
    scores = []
    for head in np.unique(idx):
        sel = idx == head
        if sel.sum() >= 10:
            scores.append(_balanced(hit[sel], labels[sel]))
    if not scores:
        return _balanced(hit, labels)
    return float(min(scores))


def train_network(net: NetworkParams, samples: list, opt: Optional[OptState],
                  config: GameConfig, rng_seed: int = 0):
    """Shuffled mini-batch RMSProp on the masked BCE until the train
    accuracy threshold (or max_epochs) is reached. Returns (net, TrainStats)."""
    if not samples:
        raise ValueError("train_network needs a non-empty sample list")
    if opt is None:
        opt = OptState.zeros_like(net, learning_rate=config.learning_rate,
                                  batch_size=config.batch_size)
    pixels = np.stack([s.patch for s in samples])
    idx = np.array([s.target_index for s in samples], dtype=np.intp)
    targets = np.array([s.target_value for s in samples], dtype=np.float64)

    rng = np.random.default_rng(rng_seed)
    n = len(samples)
    epochs_run = 0
    accuracy = 0.0
    # at least one epoch per call: the threshold is checked after each epoch
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, opt.batch_size):
            take = order[start:start + opt.batch_size]
            batch = [samples[int(i)] for i in take]
            grads = neural.backward(net, batch)
            net, opt = neural.rmsprop_step(net, grads, opt)
        epochs_run += 1
        accuracy = _accuracy(net, pixels, idx, targets, config.accuracy_mode)
        if accuracy >= config.train_accuracy_threshold:
            break
    loss = neural.batch_loss(net, samples[: min(n, 512)])
    return net, TrainStats(epochs_run, accuracy, loss, n)


# ---------------------------------------------------------------------------
# probes


def measure_dislodge_rates(env: Environment, protagonist: NetworkParams,
                           adversary: Optional[NetworkParams], kind: str,
                           n_successes: int, rng_seed: int,
                           grasp_mode: SelectionMode = GREEDY) -> dict:
    """Dislodge rates over a probe set of freshly collected successful grasps.

    Reports the worst-case rate (exhaustive over the action space), the
    random-action rate, and the trained adversary's greedy rate when a
    network is given. The probe set is fixed by the seed and the grasp
    selection mode (greedy for deployed robustness, importance sampling for
    a margin-spanning probe).
    """
    n_actions = N_SHAKE_ACTIONS if kind == "shake" else N_SNATCH_ACTIONS
    rng = np.random.default_rng(derive_seed(rng_seed, "probe-random"))
    worst = rand = greedy = 0
    found = 0
    attempts = 0
    max_attempts = 12 * n_successes
    while found < n_successes and attempts < max_attempts:
        i = attempts
        attempts += 1
        scene = scene_from_seed(env, derive_seed(rng_seed, "scene", i))
        image = scene_mod.render_scene(scene)
        cands = policy.sample_candidates(image, env.candidates_per_image,
                                         derive_seed(rng_seed, "cands", i))
        matrix = policy.probability_matrix(protagonist, image, cands)
        grasp = policy.select_grasp(matrix, grasp_mode,
                                    derive_seed(rng_seed, "pick", i))
        outcome = grasp_sim.grasp_margin(scene.object, scene.pose, grasp, env.sim)
        if not grasp_sim.static_hold(outcome, scene.object, env.sim):
            continue
        found += 1

        def dislodged_by(index: int) -> bool:
            action = AdversaryAction(kind, index)
            if kind == "shake":
                return grasp_sim.apply_shake(outcome, grasp, scene.object,
                                             env.sim, action)
            return grasp_sim.apply_snatch(outcome, grasp, scene.object,
                                          scene.pose, env.sim, action)

        worst += any(dislodged_by(a) for a in range(n_actions))
        rand += dislodged_by(int(rng.integers(n_actions)))
        if adversary is not None:
            rpatch = scene_mod.extract_rotated_patch(image, (grasp.x, grasp.y),
                                                     grasp.angle)
            act = policy.select_adversary(adversary, rpatch, n_actions, GREEDY, 0)
            greedy += dislodged_by(act.index)
    if found == 0:
        raise ZeroSuccessfulGraspsError("probe found no successful grasps")
    return {
        "n_successes": found,
        "attempts": attempts,
        "worst_case_rate": worst / found,
        "random_rate": rand / found,
        "adversary_rate": (greedy / found) if adversary is not None else None,
    }


# ---------------------------------------------------------------------------
# the joint loop, staged through an artifact directory


def _write_json(path, payload) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class _Stages:
    """Completed-stage ledger backing resumable runs."""

    def __init__(self, art_dir: str, resume: bool):
        self.path = os.path.join(art_dir, "state.json")
        if resume and os.path.exists(self.path):
            self.completed = list(_read_json(self.path)["completed"])
        else:
            self.completed = []
            _write_json(self.path, {"completed": self.completed})

    def run(self, name: str, fn) -> None:
        if name in self.completed:
            return
        fn()
        self.completed.append(name)
        _write_json(self.path, {"completed": self.completed})


@dataclass
class JointTrainResult:
    arm_dir: str
    protagonist_paths: list
    adversary_paths: list
    metrics: dict


def _collection_stats(records: list) -> dict:
    n = len(records)
    succ = sum(r.grasp_success for r in records)
    attempted = sum(r.adversary_action is not None for r in records)
    dislodged = sum(bool(r.adversary_success) for r in records)
    return {
        "episodes": n,
        "successes": succ,
        "success_rate": succ / n if n else 0.0,
        "adversary_attempts": attempted,
        "adversary_dislodged": dislodged,
        "adversary_dislodge_rate": dislodged / attempted if attempted else None,
    }


def joint_train(env: Environment, config: GameConfig, kind: Optional[str],
                rng_seed: int, artifact_dir: str,
                init_protagonist_path: Optional[str] = None,
                resume: bool = False, run_probes: bool = True) -> JointTrainResult:
    """Run (or resume) one training arm, staging everything through files.

    kind="shake"/"snatch" trains protagonist and adversary jointly; kind=None
    is the no-adversary baseline (targets degenerate to the plain
    success/failure labels) with the budget multiplier applied. A snatch arm
    starts from `init_protagonist_path` instead of random collection.
    Per iteration, the adversary always trains on data collected before the
    protagonist update of that iteration.
    """
    config.validate()
    os.makedirs(artifact_dir, exist_ok=True)
    stages = _Stages(artifact_dir, resume)
    scale = config.baseline_budget_multiplier if kind is None else 1.0
    n_init = math.ceil(config.init_random_grasps * scale)
    n_iter = math.ceil(config.grasps_per_iteration * scale)
    iterations = config.iterations["shake" if kind is None else kind]
    n_actions = {None: 0, "shake": N_SHAKE_ACTIONS, "snatch": N_SNATCH_ACTIONS}[kind]

    dataset_paths = []
    grasp_budget = 0

    def path(*parts) -> str:
        return os.path.join(artifact_dir, *parts)

    # --- protagonist initialization (random data, plain labels)
    if init_protagonist_path is None:
        init_data = path("init_dataset.ndjson")

        def do_init_collect():
            records = collect_random_grasps(env, n_init,
                                            derive_seed(rng_seed, "init-collect"))
            write_dataset(records, init_data)
            _write_json(path("init_collect_metrics.json"), _collection_stats(records))

        stages.run("init-collect", do_init_collect)
        dataset_paths.append(init_data)
        grasp_budget += n_init

        def do_init_train():
            records = read_dataset(init_data)
            samples = make_protagonist_targets(records, None, config.alpha,
                                               config.label_mode)
            net = neural.init_network(grasp_sim.N_ANGLE_BINS,
                                      derive_seed(rng_seed, "init-net"))
            net, stats = train_network(net, samples, None, config,
                                       derive_seed(rng_seed, "init-train"))
            neural.save_network(net, path("init_protagonist.ckpt"))
            _write_json(path("init_protagonist_targets.json"),
                        {"alpha": config.alpha, "adversary_checkpoint": None,
                         "label_mode": config.label_mode,
                         "targets": [s.target_value for s in samples]})
            _write_json(path("init_train_metrics.json"), stats.__dict__)

        stages.run("init-train", do_init_train)
        protagonist_path = path("init_protagonist.ckpt")
    else:
        protagonist_path = init_protagonist_path

    adversary_path = None
    protagonist_paths = []
    adversary_paths = []

    for k in range(iterations):
        it_dir = path(f"iter-{k}")
        os.makedirs(it_dir, exist_ok=True)
        data_path = os.path.join(it_dir, "dataset.ndjson")

        def do_collect(k=k, data_path=data_path, it_dir=it_dir,
                       protagonist_path=protagonist_path,
                       adversary_path=adversary_path):
            protagonist = neural.load_network(protagonist_path)
            adversary = (neural.load_network(adversary_path)
                         if adversary_path is not None else None)
            records = collect_with_adversary(
                env, protagonist, adversary, kind, n_iter,
                importance(1.0), GREEDY,
                derive_seed(rng_seed, "collect", k), iteration=k)
            if kind is not None and not any(r.grasp_success for r in records):
                raise ZeroSuccessfulGraspsError(
                    f"iteration {k} collected no successful grasps")
            write_dataset(records, data_path)
            _write_json(os.path.join(it_dir, "collect_metrics.json"),
                        _collection_stats(records))

        stages.run(f"iter{k}-collect", do_collect)
        dataset_paths.append(data_path)
        grasp_budget += n_iter

        if kind is not None:
            adv_ckpt = os.path.join(it_dir, "adversary.ckpt")

            def do_train_adversary(k=k, it_dir=it_dir, adv_ckpt=adv_ckpt,
                                   adversary_path=adversary_path):
                records = _read_all(dataset_paths)
                samples = make_adversary_targets(records)
                if not samples:
                    raise ZeroSuccessfulGraspsError(
                        f"iteration {k} has no adversary training samples")
                if adversary_path is None:
                    net = neural.init_network(n_actions,
                                              derive_seed(rng_seed, "adv-net"))
                else:
                    net = neural.load_network(adversary_path)
                net, stats = train_network(net, samples, None, config,
                                           derive_seed(rng_seed, "adv-train", k))
                neural.save_network(net, adv_ckpt)
                _write_json(os.path.join(it_dir, "adversary_targets.json"),
                            {"targets": [s.target_value for s in samples]})
                _write_json(os.path.join(it_dir, "adversary_train_metrics.json"),
                            stats.__dict__)

            stages.run(f"iter{k}-train-adversary", do_train_adversary)
            adversary_path = adv_ckpt
            adversary_paths.append(adv_ckpt)

        prot_ckpt = os.path.join(it_dir, "protagonist.ckpt")

        def do_train_protagonist(k=k, it_dir=it_dir, prot_ckpt=prot_ckpt,
                                 protagonist_path=protagonist_path,
                                 adversary_path=adversary_path):
            records = _read_all(dataset_paths)
            adversary = (neural.load_network(adversary_path)
                         if adversary_path is not None else None)
            samples = make_protagonist_targets(records, adversary, config.alpha,
                                               config.label_mode)
            net = neural.load_network(protagonist_path)
            net, stats = train_network(net, samples, None, config,
                                       derive_seed(rng_seed, "prot-train", k))
            neural.save_network(net, prot_ckpt)
            rel_adv = (os.path.relpath(adversary_path, artifact_dir)
                       if adversary_path else None)
            _write_json(os.path.join(it_dir, "protagonist_targets.json"),
                        {"alpha": config.alpha, "adversary_checkpoint": rel_adv,
                         "label_mode": config.label_mode,
                         "targets": [s.target_value for s in samples]})
            _write_json(os.path.join(it_dir, "protagonist_train_metrics.json"),
                        stats.__dict__)

        stages.run(f"iter{k}-train-protagonist", do_train_protagonist)
        protagonist_path = prot_ckpt
        protagonist_paths.append(prot_ckpt)

        if run_probes and kind is not None:
            def do_probe(k=k, it_dir=it_dir, protagonist_path=protagonist_path,
                         adversary_path=adversary_path):
                protagonist = neural.load_network(protagonist_path)
                adversary = (neural.load_network(adversary_path)
                             if adversary_path is not None else None)
                probe = measure_dislodge_rates(
                    env, protagonist, adversary, kind,
                    config.probe_successes, derive_seed(rng_seed, "probe", k))
                _write_json(os.path.join(it_dir, "probe_metrics.json"), probe)

            stages.run(f"iter{k}-probe", do_probe)

    metrics = _summarize(artifact_dir, kind, iterations, grasp_budget,
                         init_protagonist_path is not None)
    _write_json(path("metrics.json"), metrics)
    return JointTrainResult(artifact_dir, protagonist_paths, adversary_paths, metrics)


def _read_all(paths: list) -> list:
    records = []
    for p in paths:
        records.extend(read_dataset(p))
    return records


def _summarize(art_dir: str, kind: Optional[str], iterations: int,
               grasp_budget: int, external_init: bool) -> dict:
    per_iter = []
    cumulative = 0
    if not external_init:
        init_stats = _read_json(os.path.join(art_dir, "init_collect_metrics.json"))
        cumulative = init_stats["episodes"]
    else:
        init_stats = None
    for k in range(iterations):
        it_dir = os.path.join(art_dir, f"iter-{k}")
        entry = {"iteration": k,
                 "collect": _read_json(os.path.join(it_dir, "collect_metrics.json"))}
        cumulative += entry["collect"]["episodes"]
        entry["cumulative_grasps"] = cumulative
        entry["protagonist_train"] = _read_json(
            os.path.join(it_dir, "protagonist_train_metrics.json"))
        adv_path = os.path.join(it_dir, "adversary_train_metrics.json")
        if os.path.exists(adv_path):
            entry["adversary_train"] = _read_json(adv_path)
        probe_path = os.path.join(it_dir, "probe_metrics.json")
        if os.path.exists(probe_path):
            entry["probe"] = _read_json(probe_path)
        per_iter.append(entry)
    return {
        "kind": kind or "baseline",
        "iterations": per_iter,
        "init_collect": init_stats,
        "total_grasp_attempts": grasp_budget,
    }
