"""Episode dataset persistence: newline-delimited JSON records.

Patch pixel arrays travel as base64-encoded little-endian float32, so a
write/read round trip reproduces every field exactly (floats go through
repr-exact JSON, patches through raw bytes).
"""
from __future__ import annotations

import base64
import json

import numpy as np

from .grasp_sim import EpisodeRecord, GraspAction
from .scene import PATCH_SIZE, Patch


class DatasetFormatError(ValueError):
    pass


def _encode_patch(patch: Patch) -> dict:
    return {
        "pixels": base64.b64encode(
            np.ascontiguousarray(patch.pixels, dtype="<f4").tobytes()).decode("ascii"),
        "center": [patch.source_center[0], patch.source_center[1]],
        "angle": patch.source_angle,
    }


def _decode_patch(obj: dict) -> Patch:
    raw = base64.b64decode(obj["pixels"])
    expected = PATCH_SIZE * PATCH_SIZE * 4
    if len(raw) != expected:
        raise ValueError(f"patch payload is {len(raw)} bytes, wanted {expected}")
    pixels = np.frombuffer(raw, dtype="<f4").reshape(PATCH_SIZE, PATCH_SIZE).copy()
    return Patch(pixels, (obj["center"][0], obj["center"][1]), obj["angle"])


def record_to_json(record: EpisodeRecord) -> str:
    payload = {
        "scene_seed": record.scene_seed,
        "object_id": record.object_id,
        "pose": list(record.pose),
        "grasp": {"x": record.grasp.x, "y": record.grasp.y,
                  "theta_bin": record.grasp.theta_bin},
        "grasp_success": record.grasp_success,
        "margin": record.margin,
        "grasp_patch": _encode_patch(record.grasp_patch),
        "rotated_patch": (None if record.rotated_patch is None
                          else _encode_patch(record.rotated_patch)),
        "adversary_kind": record.adversary_kind,
        "adversary_action": record.adversary_action,
        "adversary_success": record.adversary_success,
        "iteration": record.iteration,
        "config_id": record.config_id,
        "rng_seed": record.rng_seed,
    }
    return json.dumps(payload, sort_keys=True)


def record_from_json(line: str) -> EpisodeRecord:
    obj = json.loads(line)
    grasp = GraspAction(obj["grasp"]["x"], obj["grasp"]["y"], obj["grasp"]["theta_bin"])
    return EpisodeRecord(
        scene_seed=obj["scene_seed"],
        object_id=obj["object_id"],
        pose=tuple(obj["pose"]),
        grasp=grasp,
        grasp_patch=_decode_patch(obj["grasp_patch"]),
        grasp_success=obj["grasp_success"],
        margin=obj["margin"],
        rotated_patch=(None if obj["rotated_patch"] is None
                       else _decode_patch(obj["rotated_patch"])),
        adversary_kind=obj["adversary_kind"],
        adversary_action=obj["adversary_action"],
        adversary_success=obj["adversary_success"],
        iteration=obj["iteration"],
        config_id=obj["config_id"],
        rng_seed=obj["rng_seed"],
    )


def write_dataset(records, path) -> None:
    """One JSON object per line, one line per episode."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record))
            fh.write("\n")


def read_dataset(path):
    """Inverse of write_dataset; malformed lines raise with their line number."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            try:
                records.append(record_from_json(line))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def records_equal(a: EpisodeRecord, b: EpisodeRecord) -> bool:
    """Field-for-field equality, patches compared bit-exactly."""
    def patches_equal(p, q):
        if p is None or q is None:
            return p is None and q is None
        return (np.array_equal(p.pixels, q.pixels)
                and tuple(p.source_center) == tuple(q.source_center)
                and p.source_angle == q.source_angle)

    return (a.scene_seed == b.scene_seed and a.object_id == b.object_id
            and tuple(a.pose) == tuple(b.pose) and a.grasp == b.grasp
            and a.grasp_success == b.grasp_success and a.margin == b.margin
            and patches_equal(a.grasp_patch, b.grasp_patch)
            and patches_equal(a.rotated_patch, b.rotated_patch)
            and a.adversary_kind == b.adversary_kind
            and a.adversary_action == b.adversary_action
            and a.adversary_success == b.adversary_success
            and a.iteration == b.iteration and a.config_id == b.config_id
            and a.rng_seed == b.rng_seed)
