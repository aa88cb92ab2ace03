"""Action selection: candidate sampling, the grasp probability matrix, and
greedy / importance-sampled / uniform selection for both players."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import grasp_sim, neural, scene as scene_mod
from .grasp_sim import AdversaryAction, GraspAction, N_SHAKE_ACTIONS, N_SNATCH_ACTIONS
from .neural import NetworkParams
from .scene import Image, Patch


@dataclass(frozen=True)
class SelectionMode:
    kind: str                 # "greedy" | "importance" | "uniform_random"
    beta: float = 1.0         # importance-sampling temperature, > 0

    def __post_init__(self):
        if self.kind not in ("greedy", "importance", "uniform_random"):
            raise ValueError(f"unknown selection mode {self.kind!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


GREEDY = SelectionMode("greedy")
UNIFORM = SelectionMode("uniform_random")


def importance(beta: float = 1.0) -> SelectionMode:
    return SelectionMode("importance", beta)


@dataclass
class ProbMatrix:
    entries: np.ndarray       # (N_g, N_a) probabilities
    candidates: np.ndarray    # (N_g, 2) grasp centers in meters


def sample_candidates(image: Image, n: int, rng_seed: int) -> np.ndarray:
    """n grasp centers drawn uniformly from the object mask (intensity > 0).

    Falls back to uniform positions over the whole workspace when the mask
    is empty. Deterministic in the seed; drawing k <= n candidates with the
    same seed yields the first k of the n.
    """
    if n < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(rng_seed)
    mask = np.argwhere(image.pixels > 0.0)
    if len(mask) == 0:
        return rng.uniform(0.0, scene_mod.WORKSPACE_SIZE, size=(n, 2))
    picks = mask[rng.integers(0, len(mask), size=n)]
    # argwhere gives (row, col); centers are pixel centers in meters
    return (picks[:, ::-1] + 0.5) * image.meters_per_pixel


def probability_matrix(net: NetworkParams, image: Image,
                       candidates: np.ndarray) -> ProbMatrix:
    """Row g = network probabilities on the unrotated patch at candidate g."""
    candidates = np.asarray(candidates, dtype=float)
    if len(candidates) == 0:
        raise ValueError("need at least one candidate")
    patches = scene_mod.extract_patches(image, candidates, np.zeros(len(candidates)))
    probs = neural.forward(net, patches)
    return ProbMatrix(probs, candidates)


def _select_cell(entries: np.ndarray, mode: SelectionMode, rng_seed: int) -> int:
    """Flat cell index under the given mode; ties go to the lowest flat index."""
    flat = entries.reshape(-1)
    if mode.kind == "greedy":
        return int(np.argmax(flat))
    rng = np.random.default_rng(rng_seed)
    if mode.kind == "uniform_random":
        return int(rng.integers(flat.size))
    # importance: p proportional to entry^beta, computed in log space
    logp = mode.beta * np.log(np.maximum(flat, 1e-300))
    logp -= logp.max()
    p = np.exp(logp)
    p /= p.sum()
    return int(rng.choice(flat.size, p=p))


def select_grasp(matrix: ProbMatrix, mode: SelectionMode, rng_seed: int) -> GraspAction:
    """Pick a (candidate, angle) cell; greedy ties break to the smallest
    candidate index, then the smallest angle bin (row-major order)."""
    cell = _select_cell(matrix.entries, mode, rng_seed)
    g, a = divmod(cell, matrix.entries.shape[1])
    x, y = matrix.candidates[g]
    return GraspAction(float(x), float(y), int(a))


def select_adversary(net: NetworkParams, rotated_patch: Patch, n_actions: int,
                     mode: SelectionMode, rng_seed: int) -> AdversaryAction:
    """Pick a shake (15) or snatch (36) action from network probabilities."""
    if n_actions not in (N_SHAKE_ACTIONS, N_SNATCH_ACTIONS):
        raise ValueError(f"n_actions must be 15 or 36, got {n_actions}")
    if net is not None and net.n_outputs != n_actions:
        raise ValueError(f"network has {net.n_outputs} outputs, wanted {n_actions}")
    kind = "shake" if n_actions == N_SHAKE_ACTIONS else "snatch"
    if net is None:
        if mode.kind != "uniform_random":
            raise ValueError("a network is required unless selecting uniformly")
        rng = np.random.default_rng(rng_seed)
        return AdversaryAction(kind, int(rng.integers(n_actions)))
    probs = neural.forward(net, rotated_patch)
    return AdversaryAction(kind, _select_cell(probs, mode, rng_seed))
