"""Planar rigid-body geometry: rotations, poses, oriented boxes, and the
signed separation/penetration distance between two oriented rectangles.

The signed distance is the collision measure used everywhere else: positive
values are the minimum Euclidean gap between disjoint boxes, negative values
the minimal translation distance needed to separate overlapping ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose2",
    "OrientedBox",
    "wrap_angle",
    "rotation_matrix",
    "rotate",
    "obb_signed_distance",
]

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi]."""
    return math.pi - (math.pi - theta) % _TWO_PI


def rotation_matrix(theta: float) -> np.ndarray:
    """Counterclockwise rotation matrix R_theta."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate(theta: float, v) -> np.ndarray:
    """Rotate a 2-vector counterclockwise by theta."""
    c, s = math.cos(theta), math.sin(theta)
    v = np.asarray(v, dtype=float)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


@dataclass(frozen=True)
class Pose2:
    """Planar pose (x, y, psi) with psi normalized to (-pi, pi]."""

    x: float
    y: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle with center, heading (normalized to (-pi, pi]), and size."""

    cx: float
    cy: float
    heading: float
    length: float
    width: float

    def __post_init__(self):
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("box dimensions must be positive")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def corners(self) -> np.ndarray:
        """The four corners, counterclockwise, as a (4, 2) array."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center

    def axes(self) -> np.ndarray:
        """Unit edge normals (the two box axes) as a (2, 2) array."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([[c, s], [-s, c]])


def _segment_point_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point (n, 2) to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def _polygon_gap(pa: np.ndarray, pb: np.ndarray) -> float:
    """Minimum vertex-to-edge distance between two disjoint convex polygons."""
    best = math.inf
    for pts, poly in ((pa, pb), (pb, pa)):
        n = len(poly)
        for i in range(n):
            d = _segment_point_distances(pts, poly[i], poly[(i + 1) % n])
            best = min(best, float(d.min()))
    return best


def obb_signed_distance(a: OrientedBox, b: OrientedBox) -> float:
    """Signed distance between two oriented rectangles.

    Positive: minimum Euclidean gap when disjoint. Negative: minus the
    minimal translation distance needed to separate overlapping boxes.
    Separating-axis projections over the four face normals decide overlap
    exactly for rectangles and give the penetration depth; the disjoint
    branch refines to the true gap via vertex-edge search.
    """
    ca = a.corners()
    cb = b.corners()
    axes = np.vstack([a.axes(), b.axes()])
    # Signed gap along each axis; max over axes is >= 0 iff boxes disjoint.
    proj_a = ca @ axes.T
    proj_b = cb @ axes.T
    gaps = np.maximum(
        proj_b.min(axis=0) - proj_a.max(axis=0),
        proj_a.min(axis=0) - proj_b.max(axis=0),
    )
    sep = float(gaps.max())
    if sep < 0.0:
        return sep  # minus the minimal translation over face normals
    if sep == 0.0:
        return 0.0  # touching
    return _polygon_gap(ca, cb)
