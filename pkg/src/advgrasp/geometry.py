"""2D polygon primitives shared by the object generator and the grasp model.

Conventions: a polygon is an (N, 2) float array of counter-clockwise
vertices in meters. All functions are pure.
"""
from __future__ import annotations

import numpy as np

_EPS = 1e-12


def cross2(a, b):
    """z-component of the 2D cross product, broadcasting over leading dims."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area (positive for CCW)."""
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    w = x * yn - xn * y
    area = 0.5 * np.sum(w)
    cx = np.sum((x + xn) * w) / (6.0 * area)
    cy = np.sum((y + yn) * w) / (6.0 * area)
    return np.array([cx, cy])


def is_ccw(verts: np.ndarray) -> bool:
    return polygon_area(verts) > 0.0


def _segments_properly_intersect(p, p2, q, q2) -> bool:
    d1 = cross2(q2 - q, p - q)
    d2 = cross2(q2 - q, p2 - q)
    d3 = cross2(p2 - p, q - p)
    d4 = cross2(p2 - p, q2 - p)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def is_simple(verts: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect. O(n^2), fine for n <= 16."""
    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return False
    return True


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns hull vertices in CCW order."""
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    if len(pts) <= 2:
        return pts

    def half(iterable):
        out = []
        for p in iterable:
            while len(out) >= 2 and cross2(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def reflex_vertex_indices(verts: np.ndarray) -> np.ndarray:
    """Indices whose interior angle exceeds pi (assumes CCW orientation)."""
    prev = np.roll(verts, 1, axis=0)
    nxt = np.roll(verts, -1, axis=0)
    turn = cross2(verts - prev, nxt - verts)
    return np.nonzero(turn < 0)[0]


def points_in_polygon(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Crossing-parity membership test for many points at once.

    points: (N, 2); returns boolean (N,). Boundary behaviour follows the
    half-open edge rule and is deterministic.
    """
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    x0, y0 = verts[:, 0][None, :], verts[:, 1][None, :]
    x1 = np.roll(verts[:, 0], -1)[None, :]
    y1 = np.roll(verts[:, 1], -1)[None, :]
    straddle = (y0 <= py) != (y1 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (py - y0) / (y1 - y0)
        x_at = x0 + t * (x1 - x0)
    crossing = straddle & (x_at > px)
    return (np.count_nonzero(crossing, axis=1) % 2) == 1


def line_polygon_crossings(p0: np.ndarray, direction: np.ndarray, verts: np.ndarray):
    """Intersections of the infinite line p0 + t*direction with a polygon boundary.

    Returns (ts, edge_indices) sorted by t. Half-open edges avoid double
    counting shared vertices; edges parallel to the line are skipped.
    """
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    denom = cross2(direction, e)
    rel = a - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross2(rel, e) / denom
        s = cross2(rel, direction) / denom
    ok = (np.abs(denom) > _EPS) & (s >= 0.0) & (s < 1.0)
    ts = t[ok]
    idx = np.nonzero(ok)[0]
    order = np.argsort(ts, kind="stable")
    return ts[order], idx[order]


def edge_outward_normals(verts: np.ndarray) -> np.ndarray:
    """Unit outward normals per edge, assuming CCW orientation."""
    e = np.roll(verts, -1, axis=0) - verts
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def segment_min_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between segments [a0,a1] and [b0,b1]."""
    a0, a1, b0, b1 = (np.asarray(v, dtype=float) for v in (a0, a1, b0, b1))
    if _segments_properly_intersect(a0, a1, b0, b1):
        return 0.0

    def point_seg(p, s0, s1):
        d = s1 - s0
        dd = float(d @ d)
        if dd < _EPS:
            return float(np.linalg.norm(p - s0))
        t = np.clip(float((p - s0) @ d) / dd, 0.0, 1.0)
        return float(np.linalg.norm(p - (s0 + t * d)))

    return min(
        point_seg(a0, b0, b1),
        point_seg(a1, b0, b1),
        point_seg(b0, a0, a1),
        point_seg(b1, a0, a1),
    )


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def transform_points(points: np.ndarray, pose) -> np.ndarray:
    """Apply pose (x, y, phi): rotate by phi then translate by (x, y)."""
    x, y, phi = pose
    return points @ rotation_matrix(phi).T + np.array([x, y])
