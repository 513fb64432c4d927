"""
Uniform-grid spatial index
Broad phase for raycasts, contacts and spatial queries. Entities are binned
by the cell of their center; a query visits the ring of cells that can hold
any entity within reach, then the caller (or query_disc) runs the exact
narrow phase.
"""

from __future__ import annotations

import math

import numpy as np

from trafficlab.geometry import RectSet, disc_rect_overlap

DEFAULT_CELL_SIZE = 20.0


class UniformGrid:
    def __init__(self, cell_size=DEFAULT_CELL_SIZE):
        self.cell_size = float(cell_size)
        self.rects = RectSet.empty()
        self._order = np.zeros(0, dtype=np.int64)
        self._sorted_keys = np.zeros(0, dtype=np.int64)
        self._max_radius = 0.0
        self._bounds = (0, 0, 0, 0)
        self._stride = 1

    def __len__(self):
        return len(self.rects)

    # ------------------------------------------------------------------ #
    #  Build
    # ------------------------------------------------------------------ #

    def build(self, rects):
        """Index a RectSet. Rebuilding replaces the previous contents."""
        self.rects = rects
        if len(rects) == 0:
            self._order = np.zeros(0, dtype=np.int64)
            self._sorted_keys = np.zeros(0, dtype=np.int64)
            self._max_radius = 0.0
            return self

        cells = np.floor(rects.centers / self.cell_size).astype(np.int64)
        x0, z0 = cells.min(axis=0)
        x1, z1 = cells.max(axis=0)
        self._bounds = (int(x0), int(z0), int(x1), int(z1))
        self._stride = int(z1 - z0 + 1)
        keys = (cells[:, 0] - x0) * self._stride + (cells[:, 1] - z0)
        self._order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._order]
        self._max_radius = float(rects.radii.max())
        return self

    def _keys(self, cx, cz):
        x0, z0, x1, z1 = self._bounds
        valid = (cx >= x0) & (cx <= x1) & (cz >= z0) & (cz <= z1)
        key = (cx - x0) * self._stride + (cz - z0)
        return np.where(valid, key, -1)

    # ------------------------------------------------------------------ #
    #  Queries
    # ------------------------------------------------------------------ #

    def candidates(self, points, reach):
        """Broad-phase (query index, entity index) pairs.

        Every entity whose bounding circle comes within `reach` of a query
        point is returned; some farther ones may be too.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        empty = np.zeros(0, dtype=np.int64)
        if len(self.rects) == 0 or len(points) == 0:
            return empty, empty

        ring = int(math.ceil((float(reach) + self._max_radius) / self.cell_size))
        base = np.floor(points / self.cell_size).astype(np.int64)
        q_parts, e_parts = [], []
        for dx in range(-ring, ring + 1):
            for dz in range(-ring, ring + 1):
                keys = self._keys(base[:, 0] + dx, base[:, 1] + dz)
                lo = np.searchsorted(self._sorted_keys, keys, side="left")
                hi = np.searchsorted(self._sorted_keys, keys, side="right")
                counts = np.where(keys >= 0, hi - lo, 0)
                total = int(counts.sum())
                if total == 0:
                    continue
                q = np.repeat(np.arange(len(points)), counts)
                starts = np.repeat(lo, counts)
                run_starts = np.repeat(np.cumsum(counts) - counts, counts)
                e = self._order[starts + np.arange(total) - run_starts]
                q_parts.append(q)
                e_parts.append(e)
        if not q_parts:
            return empty, empty

        q = np.concatenate(q_parts)
        e = np.concatenate(e_parts)
        gap = np.hypot(*(points[q] - self.rects.centers[e]).T)
        keep = gap <= reach + self.rects.radii[e] + 1e-9
        return q[keep], e[keep]

    def self_pairs(self):
        """Index pairs (i < j) whose bounding circles overlap."""
        if len(self.rects) < 2:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        i, j = self.candidates(self.rects.centers, self._max_radius)
        keep = i < j
        i, j = i[keep], j[keep]
        radii = self.rects.radii
        gap = np.hypot(*(self.rects.centers[i] - self.rects.centers[j]).T)
        keep = gap <= radii[i] + radii[j]
        order = np.lexsort((j[keep], i[keep]))
        return i[keep][order], j[keep][order]

    def query_disc(self, position, radius):
        """Entity ids whose footprint intersects the disc, exact and sorted."""
        q, e = self.candidates(np.asarray(position, dtype=float)[None, :], radius)
        if len(e) == 0:
            return np.zeros(0, dtype=np.int64)
        r = self.rects
        inside = disc_rect_overlap(np.repeat(np.asarray(position, dtype=float)[None, :], len(e), axis=0),
                                   float(radius), r.centers[e], r.half_extents[e], r.yaws[e])
        return np.sort(r.ids[e[inside]])


def linear_scan_disc(rects, position, radius):
    """O(n) reference for UniformGrid.query_disc."""
    if len(rects) == 0:
        return np.zeros(0, dtype=np.int64)
    pts = np.repeat(np.asarray(position, dtype=float)[None, :], len(rects), axis=0)
    inside = disc_rect_overlap(pts, float(radius), rects.centers, rects.half_extents, rects.yaws)
    return np.sort(rects.ids[inside])
