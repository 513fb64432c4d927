"""
Planar geometry
Headings, oriented rectangles and the vectorized ray / overlap kernels shared
by the network builder, sensing, collision and the spatial index.

Conventions: the ground plane is (x, z). A heading of 0 degrees points along
+z and grows clockwise seen from above, so 90 degrees is +x. The local frame
of a heading has "forward" = (sin h, cos h) and "right" = (cos h, -sin h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def heading_of(dx, dz):
    """Heading in degrees [0, 360) of the direction (dx, dz)."""
    h = math.degrees(math.atan2(dx, dz)) % 360.0
    return 0.0 if h >= 360.0 else h


def headings_of(dx, dz):
    h = np.degrees(np.arctan2(dx, dz)) % 360.0
    return np.where(h >= 360.0, 0.0, h)


def forward(heading_deg):
    r = math.radians(heading_deg)
    return np.array([math.sin(r), math.cos(r)])


def right_of(direction):
    """Unit vector pointing to the right of a travel direction."""
    return np.array([direction[1], -direction[0]])


def relative_angle(heading, reference):
    """(heading - reference) normalized to [0, 360)."""
    a = (heading - reference) % 360.0
    return 0.0 if a >= 360.0 else a


def unit(v):
    v = np.asarray(v, dtype=float)
    n = float(np.hypot(v[0], v[1]))
    return v / n


# ------------------------------------------------------------------ #
#  Oriented rectangles
# ------------------------------------------------------------------ #

@dataclass
class RectSet:
    """Struct-of-arrays batch of oriented rectangles.

    half_extents[:, 0] is measured along the heading (length / 2),
    half_extents[:, 1] across it (width / 2).
    """

    ids: np.ndarray
    centers: np.ndarray
    half_extents: np.ndarray
    yaws: np.ndarray

    def __len__(self):
        return len(self.ids)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 2)),
                   np.zeros((0, 2)), np.zeros(0))

    def subset(self, index):
        return RectSet(self.ids[index], self.centers[index],
                       self.half_extents[index], self.yaws[index])

    @property
    def radii(self):
        """Bounding circle radius of every rectangle."""
        return np.hypot(self.half_extents[:, 0], self.half_extents[:, 1])


def rect_axes(yaws):
    """Forward and right unit axes, each shaped (n, 2)."""
    r = np.radians(yaws)
    s, c = np.sin(r), np.cos(r)
    fwd = np.stack([s, c], axis=-1)
    rgt = np.stack([c, -s], axis=-1)
    return fwd, rgt


def rect_corners(centers, half_extents, yaws):
    """Corners of each rectangle, shaped (n, 4, 2), counter-clockwise order."""
    fwd, rgt = rect_axes(np.asarray(yaws, dtype=float))
    hl = half_extents[:, 0:1]
    hw = half_extents[:, 1:2]
    c = np.asarray(centers, dtype=float)
    return np.stack([
        c + hl * fwd + hw * rgt,
        c + hl * fwd - hw * rgt,
        c - hl * fwd - hw * rgt,
        c - hl * fwd + hw * rgt,
    ], axis=1)


def to_local(points, centers, yaws):
    """Express points in the frames of the given rectangles (pairwise)."""
    fwd, rgt = rect_axes(yaws)
    d = np.asarray(points, dtype=float) - centers
    along = np.einsum("ij,ij->i", d, fwd)
    across = np.einsum("ij,ij->i", d, rgt)
    return along, across


def disc_rect_overlap(points, radius, centers, half_extents, yaws):
    """True where a disc (point, radius) touches or overlaps a rectangle."""
    along, across = to_local(points, centers, yaws)
    ca = np.clip(along, -half_extents[:, 0], half_extents[:, 0])
    cx = np.clip(across, -half_extents[:, 1], half_extents[:, 1])
    return np.hypot(along - ca, across - cx) <= radius + 1e-12


def ray_rect_distances(origins, directions, max_lengths, centers, half_extents, yaws):
    """Slab test of rays against rectangles, pairwise.

    Returns the entry distance of each ray into its rectangle, 0 when the
    origin is inside, inf when the ray misses within max_lengths.
    """
    fwd, rgt = rect_axes(yaws)
    rel = np.asarray(origins, dtype=float) - centers
    o_f = np.einsum("ij,ij->i", rel, fwd)
    o_r = np.einsum("ij,ij->i", rel, rgt)
    d_f = np.einsum("ij,ij->i", directions, fwd)
    d_r = np.einsum("ij,ij->i", directions, rgt)

    t_enter = np.full(len(o_f), -np.inf)
    t_exit = np.full(len(o_f), np.inf)
    miss = np.zeros(len(o_f), dtype=bool)
    for o, d, h in ((o_f, d_f, half_extents[:, 0]), (o_r, d_r, half_extents[:, 1])):
        parallel = np.abs(d) < 1e-12
        miss |= parallel & (np.abs(o) > h)
        safe = np.where(parallel, 1.0, d)
        t1 = (-h - o) / safe
        t2 = (h - o) / safe
        lo = np.where(parallel, -np.inf, np.minimum(t1, t2))
        hi = np.where(parallel, np.inf, np.maximum(t1, t2))
        t_enter = np.maximum(t_enter, lo)
        t_exit = np.minimum(t_exit, hi)

    hit = (~miss) & (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= max_lengths)
    return np.where(hit, np.maximum(t_enter, 0.0), np.inf)
