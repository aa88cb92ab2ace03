"""Deterministic physics-lite model of parallel-jaw grasping and perturbations.

A grasp is (x, y, theta) with theta one of 18 bins 10 degrees apart. The jaw
closing line runs perpendicular to the grasp angle; contacts are the extreme
crossings of that line with the object boundary. Success is purely geometric
plus a payload cap; grip force only scales the stability margin, which in turn
decides whether a shake or snatch perturbation dislodges the object.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import geometry, scene as scene_mod
from .scene import ObjectShape, Patch, Scene

GRAVITY = 9.81

N_ANGLE_BINS = 18
ANGLE_STEP = math.radians(10.0)
N_SHAKE_ACTIONS = 15
N_SNATCH_ACTIONS = 36
SNATCH_GRID_SPACING = 0.02


@dataclass(frozen=True)
class GraspAction:
    x: float
    y: float
    theta_bin: int

    @property
    def angle(self) -> float:
        return self.theta_bin * ANGLE_STEP

    def validate(self) -> None:
        if not (0 <= self.theta_bin < N_ANGLE_BINS):
            raise ValueError(f"theta_bin {self.theta_bin} out of range")
        if not (0.0 <= self.x <= scene_mod.WORKSPACE_SIZE
                and 0.0 <= self.y <= scene_mod.WORKSPACE_SIZE):
            raise ValueError(f"grasp point ({self.x}, {self.y}) outside workspace")


@dataclass(frozen=True)
class AdversaryAction:
    kind: str      # "shake" or "snatch"
    index: int

    def validate(self) -> None:
        limits = {"shake": N_SHAKE_ACTIONS, "snatch": N_SNATCH_ACTIONS}
        if self.kind not in limits:
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if not (0 <= self.index < limits[self.kind]):
            raise ValueError(f"{self.kind} index {self.index} out of range")


@dataclass(frozen=True)
class GraspOutcome:
    success: bool
    margin: float                 # in [0, 1]; 0 iff not success
    width: float                  # contact separation, 0 when no contacts
    contacts: Optional[np.ndarray]   # (2, 2) world points or None
    com_offset: float             # distance COM -> jaw line


@dataclass(frozen=True)
class SimConfig:
    grip_force: float = 7.0       # N; 35.0 in the high-force regime
    max_payload: float = 2.2      # kg
    w_max: float = 0.06           # m, maximum jaw opening
    shake_freq: float = 2.0       # Hz
    shake_amp: float = 0.025      # m
    lever_gain: float = 20.0      # 1/m, COM-offset amplification under shake
    pull_force: float = 10.0      # N, snatch pull
    clearance: float = 0.01       # m, minimum jaw-to-jaw separation for a snatch

    def validate(self) -> None:
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"sim.{name} must be positive, got {value}")

    def shake_peak_accel(self) -> float:
        """Peak acceleration of the sinusoidal shake trajectory."""
        return self.shake_amp * (2.0 * math.pi * self.shake_freq) ** 2


def jaw_direction(angle: float) -> np.ndarray:
    """Unit direction of the jaw closing line (perpendicular to the grasp angle)."""
    return np.array([math.cos(angle + math.pi / 2.0), math.sin(angle + math.pi / 2.0)])


def _line_contacts(obj: ObjectShape, pose, point: np.ndarray, direction: np.ndarray):
    """Extreme boundary crossings of the jaw line, or None.

    Returns (p_lo, p_hi, n_lo, n_hi, width) where the n's are outward edge
    normals at the extreme crossings. The physical jaws span w_max, but the
    geometric query uses the full line so that over-wide objects still yield
    contacts whose width then fails the downstream check.
    """
    world = geometry.transform_points(obj.vertices, pose)
    ts, edges = geometry.line_polygon_crossings(point, direction, world)
    if len(ts) < 2:
        return None
    t_lo, t_hi = ts[0], ts[-1]
    if not (t_lo <= 0.0 <= t_hi):
        return None
    normals = geometry.edge_outward_normals(world)
    p_lo = point + t_lo * direction
    p_hi = point + t_hi * direction
    return p_lo, p_hi, normals[edges[0]], normals[edges[-1]], float(t_hi - t_lo)


def grasp_contacts(obj: ObjectShape, pose, grasp: GraspAction) -> Optional[np.ndarray]:
    """The two extreme jaw-line contacts with the grasp point between them."""
    grasp.validate()
    hit = _line_contacts(obj, pose, np.array([grasp.x, grasp.y]), jaw_direction(grasp.angle))
    if hit is None:
        return None
    return np.stack([hit[0], hit[1]])


def _margin_at(obj: ObjectShape, pose, point: np.ndarray, angle: float,
               config: SimConfig, friction_mu: float) -> GraspOutcome:
    d = jaw_direction(angle)
    hit = _line_contacts(obj, pose, point, d)
    if hit is None:
        return GraspOutcome(False, 0.0, 0.0, None, 0.0)
    p_lo, p_hi, n_lo, n_hi, width = hit
    contacts = np.stack([p_lo, p_hi])

    com = geometry.transform_points(obj.com[None, :], pose)[0]
    com_offset = abs(float(geometry.cross2(d, com - point)))

    cone = math.atan(friction_mu)
    # jaws push inward: the lower contact is hit moving +d, the upper moving -d
    phi_lo = math.acos(float(np.clip(np.dot(n_lo, -d), -1.0, 1.0)))
    phi_hi = math.acos(float(np.clip(np.dot(n_hi, d), -1.0, 1.0)))
    phi_max = max(phi_lo, phi_hi)

    ok = (width <= config.w_max
          and phi_max < cone
          and com_offset < width
          and obj.mass <= config.max_payload)
    if not ok:
        return GraspOutcome(False, 0.0, width, contacts, com_offset)

    m_align = 1.0 - phi_max / cone
    m_center = 1.0 - com_offset / width
    m_force = min(1.0, 2.0 * friction_mu * config.grip_force / (3.0 * obj.mass * GRAVITY))
    return GraspOutcome(True, m_align * m_center * m_force, width, contacts, com_offset)


def grasp_margin(obj: ObjectShape, pose, grasp: GraspAction, config: SimConfig) -> GraspOutcome:
    """Grasp success and stability margin.

    Success needs contacts, width <= w_max, both contact normals inside the
    friction cone of the jaw axis, COM offset below the contact width, and
    mass within the payload limit. The margin multiplies alignment, centering
    and force headroom and is 0 exactly when the grasp fails.
    """
    return _margin_at(obj, pose, np.array([grasp.x, grasp.y]), grasp.angle,
                      config, obj.friction_mu)


def shake_components(index: int) -> tuple:
    """Decode a shake index into (orientation, direction); index = 3*o + d."""
    if not (0 <= index < N_SHAKE_ACTIONS):
        raise ValueError(f"shake index {index} out of range")
    return divmod(index, 3)


def shake_severity(index: int) -> float:
    """Alignment of the shake direction with the slip (jaw) axis, in [0.25, 1].

    The wrist, jaws and object rotate rigidly about the vertical approach
    axis by psi in {0,45,90,135,180} degrees; the shake is linear along one
    of the rotated wrist axes while slip happens along the world jaw axis.
    """
    o, d = shake_components(index)
    psi = math.radians(45.0 * o)
    if d == 0:
        align = abs(math.cos(psi))
    elif d == 1:
        align = abs(math.sin(psi))
    else:
        align = 0.0   # vertical shake never aligns with the in-plane jaw axis
    return 0.25 + 0.75 * align


def hold_strength(outcome: GraspOutcome, obj: ObjectShape, config: SimConfig) -> float:
    return 2.0 * obj.friction_mu * config.grip_force * outcome.margin


def shake_demand(outcome: GraspOutcome, obj: ObjectShape, config: SimConfig,
                 index: int) -> float:
    accel = config.shake_peak_accel()
    sev = shake_severity(index)
    return obj.mass * (GRAVITY + accel * sev * (1.0 + config.lever_gain * outcome.com_offset))


def apply_shake(outcome: GraspOutcome, grasp: GraspAction, obj: ObjectShape,
                config: SimConfig, action: AdversaryAction) -> bool:
    """True when the shake dislodges the held object."""
    if not outcome.success:
        raise ValueError("apply_shake called on a failed grasp")
    action.validate()
    if action.kind != "shake":
        raise ValueError("apply_shake needs a shake action")
    return shake_demand(outcome, obj, config, action.index) > hold_strength(outcome, obj, config)


def snatch_components(index: int) -> tuple:
    """Decode a snatch index into (grid cell, angle step); index = 4*t + r."""
    if not (0 <= index < N_SNATCH_ACTIONS):
        raise ValueError(f"snatch index {index} out of range")
    return divmod(index, 4)


def snatch_geometry(grasp: GraspAction, index: int) -> tuple:
    """World-frame (center, angle) of the adversary grasp for a snatch action.

    The 3x3 offset grid and the 4 snatch angles are laid out in the rotated
    patch frame, i.e. relative to the protagonist grasp orientation.
    """
    t, r = snatch_components(index)
    gx = (t % 3) - 1
    gy = (t // 3) - 1
    local = np.array([gx * SNATCH_GRID_SPACING, gy * SNATCH_GRID_SPACING])
    theta = grasp.angle
    offset = geometry.rotation_matrix(theta) @ local
    center = np.array([grasp.x, grasp.y]) + offset
    return center, theta + math.radians(45.0 * r)


def apply_snatch(outcome: GraspOutcome, grasp: GraspAction, obj: ObjectShape,
                 pose, config: SimConfig, action: AdversaryAction) -> bool:
    """True when the snatch (push-grasp then pull) dislodges the object.

    The adversary grasp must itself be a valid grasp (evaluated with the
    pull force as its grip force) and must keep its jaw span at least
    `clearance` away from the protagonist's jaw span; otherwise the attempt
    is invalid and the object survives.
    """
    if not outcome.success:
        raise ValueError("apply_snatch called on a failed grasp")
    action.validate()
    if action.kind != "snatch":
        raise ValueError("apply_snatch needs a snatch action")

    center, angle = snatch_geometry(grasp, action.index)
    adv_config = replace(config, grip_force=config.pull_force)
    adv = _margin_at(obj, pose, center, angle, adv_config, obj.friction_mu)
    if not adv.success:
        return False
    gap = geometry.segment_min_distance(outcome.contacts[0], outcome.contacts[1],
                                        adv.contacts[0], adv.contacts[1])
    if gap < config.clearance:
        return False
    return config.pull_force * adv.margin > hold_strength(outcome, obj, config)


def best_shake_dislodges(outcome: GraspOutcome, obj: ObjectShape, config: SimConfig) -> bool:
    """Worst-case probe: does any of the 15 shakes dislodge this grasp?"""
    hold = hold_strength(outcome, obj, config)
    return any(shake_demand(outcome, obj, config, i) > hold for i in range(N_SHAKE_ACTIONS))


def static_hold(outcome: GraspOutcome, obj: ObjectShape, config: SimConfig) -> bool:
    """Whether the closed gripper statically carries the object's weight.

    This is the self-supervision signal an episode records: a geometric
    grasp whose friction hold is below the weight slips out of the jaws, so
    the robot's sensor never sees it as a grasp. Fragile holds still pass
    (the weak-label regime); the evaluation report applies the stricter
    lift-survival check on top.
    """
    return outcome.success and obj.mass * GRAVITY <= hold_strength(outcome, obj, config)


@dataclass
class EpisodeRecord:
    """One grasp attempt, optionally followed by an adversary attempt."""

    scene_seed: int
    object_id: str
    pose: tuple
    grasp: GraspAction
    grasp_patch: Patch                       # unrotated, at the grasp center
    grasp_success: bool
    margin: float
    rotated_patch: Optional[Patch] = None    # present iff the grasp succeeded
    adversary_kind: Optional[str] = None
    adversary_action: Optional[int] = None
    adversary_success: Optional[bool] = None
    iteration: int = 0
    config_id: str = ""
    rng_seed: int = 0


def run_episode(scene: Scene, grasp: GraspAction,
                adversary: Optional[AdversaryAction], config: SimConfig,
                rng_seed: int = 0, iteration: int = 0, config_id: str = "",
                image=None) -> EpisodeRecord:
    """Execute one grasp (and the adversary attempt when the grasp succeeds).

    The recorded grasp_success is the weak self-supervision label: a valid
    geometric grasp whose friction hold also carries the object's weight at
    the configured grip force. The adversary is only consulted on such held
    grasps. Pure function of its arguments: identical inputs give
    bitwise-identical records. `image` may carry the scene's render to avoid
    rasterizing twice; rendering is deterministic so this never changes the
    record.
    """
    if image is None:
        image = scene_mod.render_scene(scene)
    outcome = grasp_margin(scene.object, scene.pose, grasp, config)
    held = static_hold(outcome, scene.object, config)
    grasp_patch = scene_mod.extract_rotated_patch(image, (grasp.x, grasp.y), 0.0)

    record = EpisodeRecord(
        scene_seed=scene.seed, object_id=scene.object.id, pose=tuple(scene.pose),
        grasp=grasp, grasp_patch=grasp_patch, grasp_success=held,
        margin=outcome.margin, iteration=iteration, config_id=config_id,
        rng_seed=rng_seed,
    )
    if not held:
        return record

    record.rotated_patch = scene_mod.extract_rotated_patch(
        image, (grasp.x, grasp.y), grasp.angle)
    if adversary is not None:
        if adversary.kind == "shake":
            dislodged = apply_shake(outcome, grasp, scene.object, config, adversary)
        else:
            dislodged = apply_snatch(outcome, grasp, scene.object, scene.pose,
                                     config, adversary)
        record.adversary_kind = adversary.kind
        record.adversary_action = adversary.index
        record.adversary_success = bool(dislodged)
    return record


def _success_many(obj: ObjectShape, angle: float, centers: np.ndarray,
                  config: SimConfig, friction_mu: float) -> np.ndarray:
    """Vectorized success test at one angle over many centers (object frame)."""
    d = jaw_direction(angle)
    verts = obj.vertices
    a = verts
    e = np.roll(verts, -1, axis=0) - a
    denom = geometry.cross2(np.broadcast_to(d, e.shape), e)          # (E,)
    rel = a[None, :, :] - centers[:, None, :]                        # (M, E, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = geometry.cross2(rel, e[None, :, :]) / denom[None, :]
        s = geometry.cross2(rel, np.broadcast_to(d, rel.shape)) / denom[None, :]
    ok = (np.abs(denom)[None, :] > 1e-12) & (s >= 0.0) & (s < 1.0)
    counts = ok.sum(axis=1)

    t_lo = np.where(ok, t, np.inf).min(axis=1)
    t_hi = np.where(ok, t, -np.inf).max(axis=1)
    e_lo = np.where(ok, t, np.inf).argmin(axis=1)
    e_hi = np.where(ok, t, -np.inf).argmax(axis=1)
    width = t_hi - t_lo

    normals = geometry.edge_outward_normals(verts)
    cone = math.atan(friction_mu)
    phi_lo = np.arccos(np.clip(normals[e_lo] @ (-d), -1.0, 1.0))
    phi_hi = np.arccos(np.clip(normals[e_hi] @ d, -1.0, 1.0))

    com_offset = np.abs(geometry.cross2(np.broadcast_to(d, centers.shape),
                                        obj.com[None, :] - centers))
    return ((counts >= 2) & (t_lo <= 0.0) & (t_hi >= 0.0)
            & (width <= config.w_max)
            & (np.maximum(phi_lo, phi_hi) < cone)
            & (com_offset < width)
            & (obj.mass <= config.max_payload))


def _grid_centers(obj: ObjectShape, step_px: int) -> np.ndarray:
    step = step_px * scene_mod.METERS_PER_PIXEL
    lo = obj.vertices.min(axis=0) - step
    hi = obj.vertices.max(axis=0) + step
    xs = np.arange(lo[0], hi[0] + step / 2, step)
    ys = np.arange(lo[1], hi[1] + step / 2, step)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def grasp_feasibility_grid(obj: ObjectShape, config: SimConfig, step_px: int = 4,
                           mass_override: Optional[float] = None):
    """Exhaustive grid search over (x, y, theta_bin) in the object frame.

    Scans grasp centers on a `step_px`-pixel lattice covering the object's
    bounding box and all 18 angle bins; returns the successful
    (x, y, theta_bin) triples. Backs the generator's graspability check and
    the brute-force oracle tests.
    """
    probe = obj if mass_override is None else replace_mass(obj, mass_override)
    centers = _grid_centers(probe, step_px)
    found = []
    for bin_idx in range(N_ANGLE_BINS):
        ok = _success_many(probe, bin_idx * ANGLE_STEP, centers, config, probe.friction_mu)
        for x, y in centers[ok]:
            found.append((float(x), float(y), bin_idx))
    return found


def has_feasible_grasp(obj: ObjectShape, config: SimConfig, step_px: int = 4,
                       mass_override: Optional[float] = None) -> bool:
    probe = obj if mass_override is None else replace_mass(obj, mass_override)
    centers = _grid_centers(probe, step_px)
    for bin_idx in range(N_ANGLE_BINS):
        if _success_many(probe, bin_idx * ANGLE_STEP, centers, config,
                         probe.friction_mu).any():
            return True
    return False


def replace_mass(obj: ObjectShape, mass: float) -> ObjectShape:
    return ObjectShape(obj.vertices, mass, obj.friction_mu, obj.com, obj.id)
