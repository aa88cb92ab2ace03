"""Procedural generation of graspable 2D rigid objects.

Three difficulty tiers: easy (convex 4-6-gon), medium (convex hull with one
triangular notch), hard (L- or T-shaped union of rectangles). Generation is
deterministic in (seed, difficulty) and rejects shapes for which an
exhaustive grid search finds no successful grasp at high grip force, so
every easy/medium object is graspable by construction.
"""
from __future__ import annotations

import numpy as np

from . import geometry
from .grasp_sim import SimConfig, has_feasible_grasp
from .scene import ObjectShape

DIFFICULTIES = ("easy", "medium", "hard")

MASS_RANGE = {"easy": (0.05, 0.4), "medium": (0.2, 1.0), "hard": (0.5, 2.5)}
# mass follows the polygon's area (5th..95th percentile of each family maps
# onto the difficulty's mass range) with a narrow density jitter, so an
# object's weight is readable from its silhouette; heavier variants of a
# shape are then a visible property rather than hidden label noise
AREA_RANGE = {"easy": (0.00067, 0.00265), "medium": (0.00087, 0.00318),
              "hard": (0.00426, 0.00808)}
FRICTION_RANGE = (0.4, 0.8)

# graspability screen: high-force hardware, payload-safe probe mass
_FEASIBILITY_CONFIG = SimConfig(grip_force=35.0)


def _mass_from_area(rng, difficulty: str, area: float) -> float:
    lo, hi = MASS_RANGE[difficulty]
    a_lo, a_hi = AREA_RANGE[difficulty]
    frac = np.clip((area - a_lo) / (a_hi - a_lo), 0.0, 1.0)
    density = np.exp(rng.uniform(-0.22, 0.22))
    # the mild exponent lightens mid-size shapes, keeping enough of the pool
    # holdable at 7 N while weight stays readable from the silhouette
    return float(lo + (hi - lo) * np.clip(frac ** 1.5 * density, 0.0, 1.0))


def _convex_blob(rng, a_range, b_range, n_points=7, hull_range=(4, 6),
                 jitter=(0.6, 1.0)) -> np.ndarray:
    """Convex polygon from the hull of jittered ellipse-boundary samples.

    Slender, irregular shapes keep valid grasp cells sparse: the COM-offset
    criterion confines good grasps to a strip around the centroid and the
    radius jitter spreads edge orientations across the friction cones.
    """
    while True:
        a = rng.uniform(*a_range)
        b = rng.uniform(b_range[0], min(b_range[1], 0.6 * a))
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n_points))
        radii = rng.uniform(*jitter, size=n_points)
        pts = np.stack([a * np.cos(angles) * radii, b * np.sin(angles) * radii], axis=1)
        hull = geometry.convex_hull(pts)
        if hull_range[0] <= len(hull) <= hull_range[1]:
            ext = hull.max(axis=0) - hull.min(axis=0)
            if 0.02 <= ext.max() <= 0.20:
                return hull


def _easy_polygon(rng) -> np.ndarray:
    return _convex_blob(rng, a_range=(0.05, 0.095), b_range=(0.012, 0.022))


def _medium_polygon(rng) -> np.ndarray:
    base = _convex_blob(rng, a_range=(0.05, 0.095), b_range=(0.014, 0.026),
                        n_points=8, hull_range=(5, 7))
    edges = np.roll(base, -1, axis=0) - base
    k = int(np.argmax(np.hypot(edges[:, 0], edges[:, 1])))
    va, vb = base[k], base[(k + 1) % len(base)]
    f1 = rng.uniform(0.30, 0.42)
    f2 = rng.uniform(0.58, 0.70)
    p1 = va + f1 * (vb - va)
    p2 = va + f2 * (vb - va)
    centroid = geometry.polygon_centroid(base)
    mid = 0.5 * (p1 + p2)
    apex = mid + rng.uniform(0.5, 0.8) * (centroid - mid)
    notched = np.vstack([base[: k + 1], p1, apex, p2, base[k + 1:]])
    return notched


def _hard_polygon(rng) -> np.ndarray:
    if rng.uniform() < 0.5:
        # L: horizontal arm l1 x t1 plus vertical arm t2 x l2 sharing the corner
        l1 = rng.uniform(0.09, 0.18)
        l2 = rng.uniform(0.09, 0.18)
        t1 = rng.uniform(0.018, 0.032)
        t2 = rng.uniform(0.018, 0.032)
        return np.array([(0, 0), (l1, 0), (l1, t1), (t2, t1), (t2, l2), (0, l2)],
                        dtype=float)
    # T: bar w x tb on top of a stem ws x hs
    w = rng.uniform(0.09, 0.18)
    tb = rng.uniform(0.018, 0.032)
    ws = rng.uniform(0.018, 0.032)
    hs = rng.uniform(0.06, 0.14)
    x0 = (w - ws) * rng.uniform(0.3, 0.7)
    return np.array([(x0, 0), (x0 + ws, 0), (x0 + ws, hs), (w, hs),
                     (w, hs + tb), (0, hs + tb), (0, hs), (x0, hs)], dtype=float)


_BUILDERS = {"easy": _easy_polygon, "medium": _medium_polygon, "hard": _hard_polygon}


def generate_object(seed: int, difficulty: str) -> ObjectShape:
    """Deterministic object from (seed, difficulty); every seed is valid.

    The polygon is recentered on its area centroid. Shapes with no
    grid-search-reachable grasp under 35 N (probing at a payload-safe mass,
    so hard objects may still exceed the payload limit) are redrawn from the
    same stream, keeping the result a pure function of the arguments.
    """
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty {difficulty!r} not one of {DIFFICULTIES}")
    code = DIFFICULTIES.index(difficulty)
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, code])

    for _ in range(64):
        verts = _BUILDERS[difficulty](rng)
        verts = verts - geometry.polygon_centroid(verts)
        if not geometry.is_ccw(verts):
            verts = verts[::-1].copy()
        mass = _mass_from_area(rng, difficulty, abs(geometry.polygon_area(verts)))
        friction = rng.uniform(*FRICTION_RANGE)
        obj = ObjectShape.from_vertices(verts, mass, friction, f"{difficulty}-{seed}")
        try:
            obj.validate()
        except ValueError:
            continue
        if has_feasible_grasp(obj, _FEASIBILITY_CONFIG, mass_override=min(mass, 1.0)):
            return obj
    raise RuntimeError(f"no graspable {difficulty} shape for seed {seed}")


def generate_object_set(seed_base: int, counts: dict) -> list:
    """Objects for each difficulty, seeds seed_base, seed_base+1, ..."""
    objects = []
    offset = 0
    for difficulty in DIFFICULTIES:
        for _ in range(int(counts.get(difficulty, 0))):
            objects.append(generate_object(seed_base + offset, difficulty))
            offset += 1
    return objects
