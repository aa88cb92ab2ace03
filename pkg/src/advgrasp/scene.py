"""Workspace scenes: rigid polygon objects, deterministic rendering, patches.

Coordinate conventions used throughout the package:
  - the workspace is the square [0, 0.4] x [0, 0.4] meters,
  - images are 256x256 grayscale arrays indexed [row, col] with
    x = (col + 0.5) * METERS_PER_PIXEL and y = (row + 0.5) * METERS_PER_PIXEL
    (y grows with the row index),
  - object vertices live in an object frame whose origin is the centroid;
    a scene pose (x, y, phi) rotates by phi and translates to (x, y).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry

WORKSPACE_SIZE = 0.4
IMAGE_SIZE = 256
METERS_PER_PIXEL = WORKSPACE_SIZE / IMAGE_SIZE
CROP_SIZE = 64   # raw crop, mean-pooled 2x2 down to the patch
PATCH_SIZE = 32

# texture lattice pitch in pixels; interpolated smoothly so that patch
# resampling stays well below the 1e-3 rotation-consistency tolerance
_NOISE_LATTICE = 24


@dataclass
class ObjectShape:
    """Rigid convex or non-convex simple polygon with mass and friction."""

    vertices: np.ndarray          # (N, 2) CCW, meters, centroid near origin
    mass: float                   # kg
    friction_mu: float            # in (0, 1]
    com: np.ndarray               # area centroid of vertices
    id: str                       # opaque identifier, also keys the texture

    @classmethod
    def from_vertices(cls, vertices, mass, friction_mu, id) -> "ObjectShape":
        verts = np.asarray(vertices, dtype=float)
        return cls(verts, float(mass), float(friction_mu),
                   geometry.polygon_centroid(verts), str(id))

    def validate(self) -> None:
        if not geometry.is_ccw(self.vertices):
            raise ValueError(f"object {self.id}: vertices are not CCW")
        if not geometry.is_simple(self.vertices):
            raise ValueError(f"object {self.id}: polygon self-intersects")
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        side = float(ext.max())
        if not (0.02 <= side <= 0.20):
            raise ValueError(f"object {self.id}: bounding-box side {side:.4f} out of range")
        if not (0.05 <= self.mass <= 2.5):
            raise ValueError(f"object {self.id}: mass {self.mass} out of range")
        if not (0.0 < self.friction_mu <= 1.0):
            raise ValueError(f"object {self.id}: friction {self.friction_mu} out of range")
        if np.linalg.norm(self.com - geometry.polygon_centroid(self.vertices)) > 1e-9:
            raise ValueError(f"object {self.id}: com is not the polygon centroid")

    def texture_key(self) -> int:
        digest = hashlib.sha256(self.id.encode()).digest()
        return int.from_bytes(digest[:8], "little")


@dataclass
class Scene:
    """One object at a pose in the workspace. object=None is the empty sentinel."""

    object: Optional[ObjectShape]
    pose: tuple = (0.0, 0.0, 0.0)   # (x, y, phi)
    seed: int = 0

    def world_vertices(self) -> np.ndarray:
        return geometry.transform_points(self.object.vertices, self.pose)

    def world_com(self) -> np.ndarray:
        return geometry.transform_points(self.object.com[None, :], self.pose)[0]

    def validate(self) -> None:
        if self.object is None:
            return
        w = self.world_vertices()
        if w.min() < 0.0 or w.max() > WORKSPACE_SIZE:
            raise ValueError("object does not lie fully inside the workspace")


@dataclass
class Image:
    pixels: np.ndarray   # (256, 256) float in [0, 1]
    meters_per_pixel: float = METERS_PER_PIXEL


@dataclass
class Patch:
    pixels: np.ndarray          # (32, 32) float32 in [0, 1]
    source_center: tuple        # (x, y) meters in the source image
    source_angle: float         # radians


def _hash_u64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; x is uint64, output uint64."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def _texture_noise(key: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Deterministic smooth value noise in [0, 1) keyed by the object id.

    Lattice values come from an integer hash; smoothstep-weighted bilinear
    interpolation keeps the field C1 so rotated resampling is stable.
    """
    fr = rows / _NOISE_LATTICE
    fc = cols / _NOISE_LATTICE
    r0 = np.floor(fr).astype(np.int64)
    c0 = np.floor(fc).astype(np.int64)
    tr = fr - r0
    tc = fc - c0
    tr = tr * tr * (3.0 - 2.0 * tr)
    tc = tc * tc * (3.0 - 2.0 * tc)

    def lattice(ri, ci):
        mixed = (np.uint64(key)
                 ^ (ri.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15))
                 ^ (ci.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)))
        return _hash_u64(mixed).astype(np.float64) / 2.0**64

    v00 = lattice(r0, c0)
    v01 = lattice(r0, c0 + 1)
    v10 = lattice(r0 + 1, c0)
    v11 = lattice(r0 + 1, c0 + 1)
    top = v00 + tc * (v01 - v00)
    bot = v10 + tc * (v11 - v10)
    return top + tr * (bot - top)


def render_scene(scene: Scene) -> Image:
    """Rasterize the scene: 0 outside the object, textured [0.2, 0.8] inside.

    Membership is a binary test at pixel centers (no anti-aliasing), so
    repeated calls are bitwise identical.
    """
    pixels = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=float)
    if scene.object is None:
        return Image(pixels)

    world = scene.world_vertices()
    lo = np.maximum(np.floor(world.min(axis=0) / METERS_PER_PIXEL).astype(int) - 1, 0)
    hi = np.minimum(np.ceil(world.max(axis=0) / METERS_PER_PIXEL).astype(int) + 1, IMAGE_SIZE)
    cols = np.arange(lo[0], hi[0])
    rows = np.arange(lo[1], hi[1])
    if len(cols) == 0 or len(rows) == 0:
        return Image(pixels)

    cgrid, rgrid = np.meshgrid(cols, rows)
    centers = np.stack([(cgrid.ravel() + 0.5) * METERS_PER_PIXEL,
                        (rgrid.ravel() + 0.5) * METERS_PER_PIXEL], axis=1)
    inside = geometry.points_in_polygon(centers, world)
    if not inside.any():
        return Image(pixels)

    rin = rgrid.ravel()[inside]
    cin = cgrid.ravel()[inside]
    noise = _texture_noise(scene.object.texture_key(), rin.astype(float), cin.astype(float))
    pixels[rin, cin] = 0.2 + 0.6 * noise
    return Image(pixels)


def bilinear_sample(pixels: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional pixel-center coordinates (col=x, row=y).

    Samples outside the array read as 0: corner lookups go through a
    zero-padded copy, with out-of-range indices clipped into the pad ring.
    """
    h, w = pixels.shape
    padded = np.zeros((h + 4, w + 4), dtype=pixels.dtype)
    padded[2:h + 2, 2:w + 2] = pixels
    flat = padded.ravel()

    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix = np.clip(x0, -2, w).astype(np.int32) + 2
    iy = np.clip(y0, -2, h).astype(np.int32) + 2

    stride = np.int32(w + 4)
    base = iy * stride + ix
    v00 = flat.take(base)
    v01 = flat.take(base + 1)
    v10 = flat.take(base + stride)
    v11 = flat.take(base + stride + 1)
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return top + fy * (bot - top)


def _crop_sample_coords(centers: np.ndarray, angles: np.ndarray) -> tuple:
    """Fractional image coordinates of every crop sample for many patches.

    centers: (N, 2) meters; angles: (N,). Returns float32 (x, y) arrays
    shaped (N, CROP_SIZE, CROP_SIZE). Offsets are rotated by +angle so the
    stored patch shows the image content rotated by -angle.
    """
    offs = (np.arange(CROP_SIZE, dtype=np.float32) - (CROP_SIZE - 1) / 2.0)
    u = offs[None, :]         # along patch x (columns), in pixels
    v = offs[:, None]         # along patch y (rows)
    c = np.cos(angles).astype(np.float32)
    s = np.sin(angles).astype(np.float32)
    dx = c[:, None, None] * u - s[:, None, None] * v
    dy = s[:, None, None] * u + c[:, None, None] * v
    cx = (centers[:, 0] / METERS_PER_PIXEL - 0.5).astype(np.float32)
    cy = (centers[:, 1] / METERS_PER_PIXEL - 0.5).astype(np.float32)
    return cx[:, None, None] + dx, cy[:, None, None] + dy


def extract_rotated_crop(image: Image, center, angle: float) -> np.ndarray:
    """The raw 64x64 crop at `center` rotated by -angle (bilinear, zeros outside)."""
    centers = np.asarray(center, dtype=float)[None, :]
    x, y = _crop_sample_coords(centers, np.array([angle], dtype=float))
    return bilinear_sample(image.pixels.astype(np.float32), x[0], y[0])


def pool_crop(crop: np.ndarray) -> np.ndarray:
    """2x2 mean pooling from the 64x64 crop to the 32x32 patch.

    Works on one crop or a leading batch dimension; the summation order is
    fixed so single and batched extraction agree bitwise.
    """
    a = crop[..., ::2, ::2]
    b = crop[..., ::2, 1::2]
    c = crop[..., 1::2, ::2]
    d = crop[..., 1::2, 1::2]
    quarter = np.asarray(0.25, dtype=crop.dtype)
    return ((a + b) + (c + d)) * quarter


def extract_rotated_patch(image: Image, center, angle: float) -> Patch:
    """Grasp-centered patch: 64x64 crop rotated by -angle, pooled to 32x32.

    With angle=0 the patch axes align with the image axes. The center must
    lie inside the workspace; samples beyond the image border read as 0.
    """
    cx, cy = float(center[0]), float(center[1])
    if not (0.0 <= cx <= WORKSPACE_SIZE and 0.0 <= cy <= WORKSPACE_SIZE):
        raise ValueError(f"patch center {center} outside the workspace")
    pixels = extract_patches(image, np.array([[cx, cy]]), np.array([angle]))[0]
    return Patch(pixels, (cx, cy), float(angle))


try:
    import numba as _numba
except ImportError:    # pragma: no cover - numba is optional
    _numba = None

if _numba is not None:
    @_numba.njit(cache=True, fastmath=False)
    def _extract_pool_kernel(padded, cx, cy, ca, sa, out):
        """Fused crop + bilinear + 2x2 pool; float32 op order matches the
        numpy path bit for bit."""
        h = padded.shape[0] - 4
        w = padded.shape[1] - 4
        half = np.float32((CROP_SIZE - 1) / 2.0)
        quarter = np.float32(0.25)
        for n in range(out.shape[0]):
            for i in range(PATCH_SIZE):
                for j in range(PATCH_SIZE):
                    s00 = np.float32(0.0)
                    s01 = np.float32(0.0)
                    s10 = np.float32(0.0)
                    s11 = np.float32(0.0)
                    for di in range(2):
                        for dj in range(2):
                            u = np.float32(2 * j + dj) - half
                            v = np.float32(2 * i + di) - half
                            x = cx[n] + (ca[n] * u - sa[n] * v)
                            y = cy[n] + (sa[n] * u + ca[n] * v)
                            x0 = np.float32(np.floor(x))
                            y0 = np.float32(np.floor(y))
                            fx = x - x0
                            fy = y - y0
                            xi = min(max(x0, np.float32(-2.0)), np.float32(w))
                            yi = min(max(y0, np.float32(-2.0)), np.float32(h))
                            ix = np.int64(xi) + 2
                            iy = np.int64(yi) + 2
                            v00 = padded[iy, ix]
                            v01 = padded[iy, ix + 1]
                            v10 = padded[iy + 1, ix]
                            v11 = padded[iy + 1, ix + 1]
                            top = v00 + fx * (v01 - v00)
                            bot = v10 + fx * (v11 - v10)
                            val = top + fy * (bot - top)
                            if di == 0 and dj == 0:
                                s00 = val
                            elif di == 0:
                                s01 = val
                            elif dj == 0:
                                s10 = val
                            else:
                                s11 = val
                    out[n, i, j] = ((s00 + s01) + (s10 + s11)) * quarter
else:
    _extract_pool_kernel = None


def _extract_patches_numpy(pixels32: np.ndarray, centers: np.ndarray,
                           angles: np.ndarray) -> np.ndarray:
    out = np.empty((len(centers), PATCH_SIZE, PATCH_SIZE), dtype=np.float32)
    for start in range(0, len(centers), 256):
        sl = slice(start, start + 256)
        x, y = _crop_sample_coords(centers[sl], angles[sl])
        out[sl] = pool_crop(bilinear_sample(pixels32, x, y))
    return out


def extract_patches(image: Image, centers: np.ndarray, angles: np.ndarray,
                    force_numpy: bool = False) -> np.ndarray:
    """Batched patch pixels, shape (N, 32, 32) float32.

    Uses the fused numba kernel when available; the numpy fallback computes
    bit-identical values.
    """
    centers = np.asarray(centers, dtype=float)
    angles = np.asarray(angles, dtype=float)
    pixels32 = image.pixels.astype(np.float32)
    if _extract_pool_kernel is None or force_numpy:
        return _extract_patches_numpy(pixels32, centers, angles)
    h, w = pixels32.shape
    padded = np.zeros((h + 4, w + 4), dtype=np.float32)
    padded[2:h + 2, 2:w + 2] = pixels32
    cx = (centers[:, 0] / METERS_PER_PIXEL - 0.5).astype(np.float32)
    cy = (centers[:, 1] / METERS_PER_PIXEL - 0.5).astype(np.float32)
    ca = np.cos(angles).astype(np.float32)
    sa = np.sin(angles).astype(np.float32)
    out = np.empty((len(centers), PATCH_SIZE, PATCH_SIZE), dtype=np.float32)
    _extract_pool_kernel(padded, cx, cy, ca, sa, out)
    return out
