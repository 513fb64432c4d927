"""
Road Network
Builds the city road graph: block street grids, connector roads between
blocks, lane waypoint containers with continuation (next-way) links, signal
sites with their stop lines, and static curb / building obstacles.
Networks serialize to sorted-key JSON text and load back bit-exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from trafficlab.errors import (
    CoincidentWaypoints,
    ConfigError,
    InvalidLayout,
    InvalidLayoutIndex,
    InvalidParameter,
)
from trafficlab.geometry import RectSet, heading_of, relative_angle, right_of, unit
from trafficlab.rng import NETWORK_GEN, derive_generator

LOG = logging.getLogger(__name__)

FORMAT_VERSION = 1

# next-way acceptance window
LINK_MIN_DISTANCE = 8.0
LINK_MAX_DISTANCE = 35.0
ANGLE_WINDOW_LOW = 340.0   # [340, 360)
ANGLE_WINDOW_HIGH = 80.0   # [0, 80]

MIN_WAYPOINTS = 2
MAX_WAYPOINTS = 12

# lane geometry (sim units, 1 unit = 1 m)
LANE_OFFSET = 3.0
ENTRY_SETBACK = 10.0
STOP_SETBACK = 10.0
FINAL_BEND_DEG = 15.0
FINAL_BEND_LENGTH = 10.0
CORNER_CHAMFER = 8.0
WAYPOINT_SPACING = 20.0
MIN_NODE_SPACING = 42.0

BLOCK_EXTENT_RATIO = 0.6

CURB_OFFSET = 6.5
CURB_HALF_WIDTH = 0.15
CURB_NODE_CLEARANCE = 12.0
CURB_PIECE_LENGTH = 20.0

BUILDING_SETBACK = 14.0
BUILDING_JITTER = 4.0
BUILDING_TILE = 20.0

WORLD_MARGIN = 20.0


class Scale(str, Enum):
    VERY_SMALL = "VerySmall"
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for scale in cls:
            if scale.value.lower() == key:
                return scale
        raise ConfigError(f"unknown city scale {value!r}")


DIST_CENTER = {
    Scale.VERY_SMALL: 150.0,
    Scale.SMALL: 200.0,
    Scale.MEDIUM: 300.0,
    Scale.LARGE: 350.0,
}

# (avenues per block, cross streets per avenue gap)
BLOCK_GRID = {
    Scale.VERY_SMALL: (4, 1),
    Scale.SMALL: (5, 2),
    Scale.MEDIUM: (7, 3),
    Scale.LARGE: (8, 4),
}

BLOCK_LAYOUTS = {
    Scale.VERY_SMALL: [
        [(0.0, 0.0)],
    ],
    Scale.SMALL: [
        [(0.0, 0.0), (0.0, 300.0)],
        [(-150.0, 150.0), (150.0, 150.0)],
    ],
    Scale.MEDIUM: [
        [(0.0, 0.0), (450.0, 0.0), (0.0, 450.0), (450.0, 450.0)],
        [(0.0, 0.0), (450.0, 0.0), (900.0, 0.0), (1350.0, 0.0)],
        [(0.0, 0.0), (0.0, 450.0), (0.0, 900.0), (0.0, 1350.0)],
        [(0.0, 0.0), (0.0, 450.0), (0.0, 900.0), (450.0, 0.0)],
    ],
    Scale.LARGE: [
        [(0.0, 0.0), (500.0, 0.0), (1000.0, 0.0), (0.0, 500.0), (500.0, 500.0), (1000.0, 500.0)],
        [(0.0, 0.0), (500.0, 0.0), (0.0, 500.0), (500.0, 500.0), (0.0, 1000.0), (500.0, 1000.0)],
        [(0.0, 0.0), (500.0, 0.0), (1000.0, 0.0), (1500.0, 0.0), (2000.0, 0.0), (2500.0, 0.0)],
        [(0.0, 1000.0), (0.0, 500.0), (0.0, 0.0), (500.0, 0.0), (1000.0, 0.0), (1000.0, 500.0)],
    ],
}


# ================================================================== #
#  Domain types
# ================================================================== #

@dataclass(frozen=True)
class Waypoint:
    position: tuple
    heading: float = 0.0
    container_id: int = 0

    @property
    def xz(self):
        return np.array([self.position[0], self.position[2]])


@dataclass
class PathContainer:
    id: int
    waypoints: list
    next_ways: list = field(default_factory=list)
    origin_signal: int | None = None
    dest_signal: int | None = None
    approach: str | None = None

    @property
    def first(self):
        return self.waypoints[0]

    @property
    def last(self):
        return self.waypoints[-1]

    @property
    def first_segment_length(self):
        return float(np.hypot(*(self.waypoints[1].xz - self.waypoints[0].xz)))


@dataclass
class CityGenConfig:
    scale: Scale = Scale.SMALL
    dist_center: float | None = None
    seed: int = 0
    block_layout_index: int | None = 0
    rows: int | None = None
    streets_per_gap: int | None = None

    def __post_init__(self):
        self.scale = Scale.parse(self.scale)
        if self.dist_center is None:
            self.dist_center = DIST_CENTER[self.scale]
        if float(self.dist_center) != DIST_CENTER[self.scale]:
            raise InvalidParameter(
                f"dist_center {self.dist_center} does not match scale {self.scale.value} "
                f"(expected {DIST_CENTER[self.scale]})"
            )
        self.dist_center = float(self.dist_center)

    @property
    def grid(self):
        rows, q = BLOCK_GRID[self.scale]
        return (self.rows or rows, self.streets_per_gap or q)

    def to_dict(self):
        d = asdict(self)
        d["scale"] = self.scale.value
        return d


@dataclass(frozen=True)
class StopLine:
    container_id: int
    position: tuple
    direction: tuple
    pair: str


@dataclass
class SignalSite:
    id: int
    position: tuple
    kind: str
    stop_lines: list = field(default_factory=list)


@dataclass(frozen=True)
class Obstacle:
    id: int
    kind: str
    center: tuple
    half_extents: tuple
    yaw: float = 0.0


@dataclass(frozen=True)
class NetworkArrays:
    """Flat numpy view of the containers, used by the tick pipeline."""

    wp_xy: np.ndarray
    wp_heading: np.ndarray
    offsets: np.ndarray
    counts: np.ndarray
    next_flat: np.ndarray
    next_offsets: np.ndarray
    next_counts: np.ndarray
    dest_signal: np.ndarray
    stop_xy: np.ndarray
    stop_dir: np.ndarray
    stop_pair: np.ndarray

    def target(self, path_ids, wp_index):
        return self.wp_xy[self.offsets[path_ids] + wp_index]


@dataclass
class RoadNetwork:
    containers: list
    signals: list
    obstacles: list
    center: tuple = (0.0, 0.0)
    half_extent: float = 1.0
    config: dict = field(default_factory=dict)

    def container(self, container_id):
        return self.containers[container_id]

    @property
    def light_count(self):
        return len(self.signals)

    def obstacle_rects(self):
        if not self.obstacles:
            return RectSet.empty()
        return RectSet(
            ids=np.array([o.id for o in self.obstacles], dtype=np.int64),
            centers=np.array([o.center for o in self.obstacles], dtype=float),
            half_extents=np.array([o.half_extents for o in self.obstacles], dtype=float),
            yaws=np.array([o.yaw for o in self.obstacles], dtype=float),
        )

    @cached_property
    def arrays(self):
        counts = np.array([len(c.waypoints) for c in self.containers], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        wp_xy = np.array([[w.position[0], w.position[2]]
                          for c in self.containers for w in c.waypoints], dtype=float)
        wp_heading = np.array([w.heading for c in self.containers for w in c.waypoints])
        next_counts = np.array([len(c.next_ways) for c in self.containers], dtype=np.int64)
        next_offsets = np.concatenate([[0], np.cumsum(next_counts)[:-1]]).astype(np.int64)
        next_flat = np.array([n for c in self.containers for n in c.next_ways], dtype=np.int64)

        n = len(self.containers)
        dest = np.full(n, -1, dtype=np.int64)
        stop_xy = np.zeros((n, 2))
        stop_dir = np.zeros((n, 2))
        stop_pair = np.zeros(n, dtype=np.int64)
        for site in self.signals:
            for line in site.stop_lines:
                dest[line.container_id] = site.id
                stop_xy[line.container_id] = line.position
                stop_dir[line.container_id] = line.direction
                stop_pair[line.container_id] = 0 if line.pair == "A" else 1
        return NetworkArrays(wp_xy, wp_heading, offsets, counts, next_flat,
                             next_offsets, next_counts, dest, stop_xy, stop_dir, stop_pair)

    def summary(self):
        kinds = {}
        for s in self.signals:
            kinds[s.kind] = kinds.get(s.kind, 0) + 1
        return {
            "containers": len(self.containers),
            "signals": len(self.signals),
            "signal_kinds": kinds,
            "obstacles": len(self.obstacles),
            "waypoints": int(sum(len(c.waypoints) for c in self.containers)),
        }


# ================================================================== #
#  Orientation and connectivity
# ================================================================== #

def orient_waypoints(container):
    """Point every waypoint at its successor; the last keeps its predecessor's heading."""
    wps = container.waypoints
    if len(wps) < MIN_WAYPOINTS:
        raise InvalidLayout(f"container {container.id} has {len(wps)} waypoints")
    headings = []
    for i in range(len(wps) - 1):
        a, b = wps[i].position, wps[i + 1].position
        dx, dz = b[0] - a[0], b[2] - a[2]
        if math.hypot(dx, dz) < 1e-9:
            raise CoincidentWaypoints(container.id, i)
        headings.append(heading_of(dx, dz))
    headings.append(headings[-1])
    oriented = [
        Waypoint((float(w.position[0]), 0.0, float(w.position[2])), h, container.id)
        for w, h in zip(wps, headings)
    ]
    return replace(container, waypoints=oriented)


def accepts_link(final, candidate_first):
    """Distance and angle predicates of one final -> first waypoint pair."""
    d = float(np.hypot(candidate_first.position[0] - final.position[0],
                       candidate_first.position[2] - final.position[2]))
    if d < LINK_MIN_DISTANCE or d > LINK_MAX_DISTANCE:
        return False
    rel = relative_angle(candidate_first.heading, final.heading)
    return rel >= ANGLE_WINDOW_LOW or rel <= ANGLE_WINDOW_HIGH


def infer_next_ways(containers):
    """Recompute next_ways for every container from waypoint geometry alone."""
    if not containers:
        return []
    finals = np.array([[c.last.position[0], c.last.position[2]] for c in containers])
    firsts = np.array([[c.first.position[0], c.first.position[2]] for c in containers])
    f_head = np.array([c.last.heading for c in containers])
    w_head = np.array([c.first.heading for c in containers])

    dist = np.hypot(firsts[None, :, 0] - finals[:, None, 0],
                    firsts[None, :, 1] - finals[:, None, 1])
    rel = (w_head[None, :] - f_head[:, None]) % 360.0
    ok = (dist >= LINK_MIN_DISTANCE) & (dist <= LINK_MAX_DISTANCE)
    ok &= (rel >= ANGLE_WINDOW_LOW) | (rel <= ANGLE_WINDOW_HIGH)
    np.fill_diagonal(ok, False)

    ids = [c.id for c in containers]
    return [replace(c, next_ways=[ids[j] for j in np.flatnonzero(ok[i])])
            for i, c in enumerate(containers)]


# ================================================================== #
#  Road graph
# ================================================================== #

class _RoadGraph:
    def __init__(self):
        self.nodes = []
        self.index = {}
        self.adj = []
        self.corners = {}

    def node(self, x, z):
        key = (round(x, 6), round(z, 6))
        if key not in self.index:
            self.index[key] = len(self.nodes)
            self.nodes.append(np.array([float(x), float(z)]))
            self.adj.append(set())
        return self.index[key]

    def edge(self, a, b):
        if a != b:
            self.adj[a].add(b)
            self.adj[b].add(a)

    def polyline(self, points):
        ids = [self.node(x, z) for x, z in points]
        for a, b in zip(ids, ids[1:]):
            self.edge(a, b)

    def edges(self):
        return sorted((a, b) for a in range(len(self.nodes)) for b in self.adj[a] if a < b)

    def degree(self, n):
        return len(self.adj[n])


def _cross_streets(e, rows, q, gap):
    """x offsets of the cross streets inside one avenue gap (brick pattern)."""
    if rows == 2:
        v = 2.0 * e / (q + 1)
        return [-e + k * v for k in range(1, q + 1)]
    v = 2.0 * e / (2 * q + 1)
    ks = range(1, 2 * q + 1, 2) if gap % 2 == 0 else range(2, 2 * q + 1, 2)
    return [-e + k * v for k in ks]


def _add_block(graph, center, e, rows, q, block_id):
    cx, cz = center
    avenues = [cz - e + j * 2.0 * e / (rows - 1) for j in range(rows)]
    per_avenue = {j: {-e, e} for j in range(rows)}
    gaps = []
    for g in range(rows - 1):
        xs = _cross_streets(e, rows, q, g)
        gaps.append(xs)
        for x in xs:
            per_avenue[g].add(x)
            per_avenue[g + 1].add(x)
            graph.polyline([(cx + x, avenues[g]), (cx + x, avenues[g + 1])])
    for j, z in enumerate(avenues):
        graph.polyline([(cx + x, z) for x in sorted(per_avenue[j])])
    for x in (-e, e):
        graph.polyline([(cx + x, z) for z in avenues])
    for sx in (-e, e):
        for sz in (-e, e):
            graph.corners[graph.node(cx + sx, cz + sz)] = block_id
    return {"center": (cx, cz), "extent": e, "avenues": avenues, "gaps": gaps}


def _interval_overlap(lo, hi, block_lo, block_hi):
    if hi - lo < 1e-9:
        return block_lo - 1e-9 <= lo <= block_hi + 1e-9
    return max(lo, block_lo) < min(hi, block_hi) - 1e-9


def _segment_clear_of_blocks(a, b, blocks):
    """True when an axis-aligned connector neither crosses nor runs along a block."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for blk in blocks:
        (cx, cz), e = blk["center"], blk["extent"]
        if (_interval_overlap(lo[0], hi[0], cx - e, cx + e)
                and _interval_overlap(lo[1], hi[1], cz - e, cz + e)):
            return False
    return True


def _connect_blocks(graph, blocks):
    """Join blocks with a minimum spanning set of axis-aligned corner roads."""
    corners = sorted(graph.corners)
    candidates = []
    for i, a in enumerate(corners):
        for b in corners[i + 1:]:
            if graph.corners[a] == graph.corners[b]:
                continue
            pa, pb = graph.nodes[a], graph.nodes[b]
            if abs(pa[0] - pb[0]) > 1e-6 and abs(pa[1] - pb[1]) > 1e-6:
                continue
            if not _segment_clear_of_blocks(pa, pb, blocks):
                continue
            candidates.append((float(np.hypot(*(pa - pb))), a, b))
    candidates.sort()

    parent = list(range(len(blocks)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    used = set()
    connectors = []
    for length, a, b in candidates:
        if a in used or b in used:
            continue
        ra, rb = find(graph.corners[a]), find(graph.corners[b])
        if ra == rb:
            continue
        parent[ra] = rb
        used.update((a, b))
        graph.edge(a, b)
        connectors.append((a, b, length))
    roots = {find(i) for i in range(len(blocks))}
    if len(roots) > 1:
        raise InvalidLayout("block layout cannot be connected with axis-aligned roads")
    return connectors


def _trace_chains(graph, signal_nodes):
    """Directed node chains from each signal to the next signal (or dead end)."""
    is_signal = set(signal_nodes)
    chains = []
    for s in signal_nodes:
        for n in sorted(graph.adj[s]):
            chain = [s, n]
            prev, cur = s, n
            while cur not in is_signal and graph.degree(cur) == 2:
                nxt = next(iter(graph.adj[cur] - {prev}))
                chain.append(nxt)
                prev, cur = cur, nxt
                if cur == s:
                    break
            chains.append(chain)
    return chains


# ================================================================== #
#  Lane geometry
# ================================================================== #

def _resample(a, b, spacing):
    length = float(np.hypot(*(b - a)))
    n = max(0, int(math.ceil(length / spacing - 1e-9)) - 1)
    return [a + (b - a) * (k / (n + 1)) for k in range(1, n + 1)]


def _lane_points(points):
    """Waypoint positions for a lane following the node polyline `points`."""
    pts = [np.asarray(p, dtype=float) for p in points]
    d0 = unit(pts[1] - pts[0])
    keys = [pts[0] + ENTRY_SETBACK * d0 + LANE_OFFSET * right_of(d0)]
    for i in range(1, len(pts) - 1):
        d_in = unit(pts[i] - pts[i - 1])
        d_out = unit(pts[i + 1] - pts[i])
        keys.append(pts[i] - CORNER_CHAMFER * d_in + LANE_OFFSET * right_of(d_in))
        keys.append(pts[i] + CORNER_CHAMFER * d_out + LANE_OFFSET * right_of(d_out))
    dl = unit(pts[-1] - pts[-2])
    bend = math.radians(FINAL_BEND_DEG)
    keys.append(pts[-1] - (STOP_SETBACK + FINAL_BEND_LENGTH * math.cos(bend)) * dl
                + LANE_OFFSET * right_of(dl))
    keys.append(pts[-1] - STOP_SETBACK * dl
                + (LANE_OFFSET + FINAL_BEND_LENGTH * math.sin(bend)) * right_of(dl))

    if len(keys) > MAX_WAYPOINTS:
        raise InvalidLayout(f"lane with {len(pts) - 2} corners exceeds {MAX_WAYPOINTS} waypoints")

    spacing = WAYPOINT_SPACING
    while True:
        out = [keys[0]]
        # the entry run stays one segment; later straight runs are resampled
        for k in range(1, len(keys)):
            if k % 2 == 1 and k > 1:
                out.extend(_resample(keys[k - 1], keys[k], spacing))
            out.append(keys[k])
        if len(out) <= MAX_WAYPOINTS:
            return out
        spacing += 5.0


def _stop_line(points, container_id):
    b = np.asarray(points[-1], dtype=float)
    d = unit(b - np.asarray(points[-2], dtype=float))
    pos = b - STOP_SETBACK * d + LANE_OFFSET * right_of(d)
    pair = "A" if abs(d[0]) > abs(d[1]) else "B"
    return StopLine(container_id, (float(pos[0]), float(pos[1])),
                    (float(d[0]), float(d[1])), pair)


# ================================================================== #
#  Obstacles
# ================================================================== #

def _curbs(graph, start_id):
    obstacles = []
    oid = start_id
    for a, b in graph.edges():
        pa, pb = graph.nodes[a], graph.nodes[b]
        d = unit(pb - pa)
        length = float(np.hypot(*(pb - pa)))
        run = length - 2.0 * CURB_NODE_CLEARANCE
        if run <= 0:
            continue
        pieces = int(math.ceil(run / CURB_PIECE_LENGTH))
        piece = run / pieces
        yaw = heading_of(d[0], d[1])
        for side in (-1.0, 1.0):
            for k in range(pieces):
                along = CURB_NODE_CLEARANCE + (k + 0.5) * piece
                c = pa + along * d + side * CURB_OFFSET * right_of(d)
                obstacles.append(Obstacle(oid, "curb", (float(c[0]), float(c[1])),
                                          (piece / 2.0, CURB_HALF_WIDTH), yaw))
                oid += 1
    return obstacles


def _buildings(blocks, rng, start_id):
    obstacles = []
    oid = start_id
    for blk in blocks:
        (cx, cz), e = blk["center"], blk["extent"]
        avenues = blk["avenues"]
        for g, xs in enumerate(blk["gaps"]):
            stops = [-e] + sorted(xs) + [e]
            z0, z1 = avenues[g], avenues[g + 1]
            for x0, x1 in zip(stops, stops[1:]):
                s = BUILDING_SETBACK + float(rng.uniform(0.0, BUILDING_JITTER))
                left, right = cx + x0 + s, cx + x1 - s
                bottom, top = z0 + s, z1 - s
                w, h = right - left, top - bottom
                if w <= 1.0 or h <= 1.0:
                    continue
                nx = int(math.ceil(w / BUILDING_TILE))
                nz = int(math.ceil(h / BUILDING_TILE))
                tw, th = w / nx, h / nz
                for i in range(nx):
                    for j in range(nz):
                        c = (left + (i + 0.5) * tw, bottom + (j + 0.5) * th)
                        obstacles.append(Obstacle(oid, "building", c, (th / 2.0, tw / 2.0), 0.0))
                        oid += 1
    return obstacles


# ================================================================== #
#  City generation
# ================================================================== #

def block_layout(config, rng=None):
    layouts = BLOCK_LAYOUTS[config.scale]
    index = config.block_layout_index
    if index is None:
        rng = rng if rng is not None else derive_generator(config.seed, NETWORK_GEN)
        index = int(rng.integers(len(layouts)))
    if not 0 <= int(index) < len(layouts):
        raise InvalidLayoutIndex(
            f"block_layout_index {index} out of range for {config.scale.value} "
            f"({len(layouts)} layouts)"
        )
    return int(index), layouts[int(index)]


def generate_city(config):
    """Build the road network and static obstacles for a city config."""
    rng = derive_generator(config.seed, NETWORK_GEN)
    layout_index, centers = block_layout(config, rng)
    rows, q = config.grid
    if rows < 2 or q < 1:
        raise InvalidLayout(f"block grid needs rows >= 2 and streets_per_gap >= 1, got {rows}, {q}")
    e = BLOCK_EXTENT_RATIO * config.dist_center

    graph = _RoadGraph()
    blocks = [_add_block(graph, c, e, rows, q, i) for i, c in enumerate(centers)]
    connectors = _connect_blocks(graph, blocks)

    for a, b in graph.edges():
        length = float(np.hypot(*(graph.nodes[a] - graph.nodes[b])))
        if length < MIN_NODE_SPACING - 1e-9:
            raise InvalidLayout(
                f"road between {graph.nodes[a].tolist()} and {graph.nodes[b].tolist()} "
                f"is {length:.1f} units; minimum node spacing is {MIN_NODE_SPACING}"
            )

    signal_nodes = sorted((n for n in range(len(graph.nodes)) if graph.degree(n) >= 3),
                          key=lambda n: (graph.nodes[n][1], graph.nodes[n][0]))
    signal_of = {n: i for i, n in enumerate(signal_nodes)}
    sites = [SignalSite(i, (float(graph.nodes[n][0]), float(graph.nodes[n][1])),
                        "X" if graph.degree(n) >= 4 else "T")
             for i, n in enumerate(signal_nodes)]

    containers = []
    for chain in _trace_chains(graph, signal_nodes):
        cid = len(containers)
        pts = [graph.nodes[n] for n in chain]
        wps = [Waypoint((float(p[0]), 0.0, float(p[1])), 0.0, cid) for p in _lane_points(pts)]
        dest = signal_of.get(chain[-1])
        container = PathContainer(cid, wps, [], signal_of.get(chain[0]), dest)
        if dest is not None:
            line = _stop_line(pts, cid)
            sites[dest].stop_lines.append(line)
            container.approach = line.pair
        containers.append(orient_waypoints(container))
    containers = infer_next_ways(containers)

    obstacles = _curbs(graph, 0)
    obstacles += _buildings(blocks, rng, len(obstacles))

    xy = np.array(graph.nodes)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    center = (float((lo[0] + hi[0]) / 2.0), float((lo[1] + hi[1]) / 2.0))
    half = float(max(hi - lo) / 2.0 + WORLD_MARGIN)

    meta = config.to_dict()
    meta["block_layout_index"] = layout_index
    meta["connectors"] = len(connectors)
    network = RoadNetwork(containers, sites, obstacles, center, half, meta)
    LOG.info("generated %s city (layout %d): %s", config.scale.value, layout_index,
             network.summary())
    return network


# ================================================================== #
#  Validation
# ================================================================== #

def validate_network(network):
    """Check waypoint bounds, headings and link predicates; flag dead ends."""
    report = {
        "containers": len(network.containers),
        "signals": len(network.signals),
        "obstacles": len(network.obstacles),
        "dead_ends": [],
        "waypoint_violations": [],
        "heading_violations": [],
        "link_violations": [],
    }
    by_id = {c.id: c for c in network.containers}
    for c in network.containers:
        if not MIN_WAYPOINTS <= len(c.waypoints) <= MAX_WAYPOINTS:
            report["waypoint_violations"].append(c.id)
        for a, b in zip(c.waypoints, c.waypoints[1:]):
            want = heading_of(b.position[0] - a.position[0], b.position[2] - a.position[2])
            diff = abs((a.heading - want + 180.0) % 360.0 - 180.0)
            if diff > 1e-6 or a.position[1] != 0.0:
                report["heading_violations"].append(c.id)
                break
        if not c.next_ways:
            report["dead_ends"].append(c.id)
        for n in c.next_ways:
            if n == c.id or n not in by_id or not accepts_link(c.last, by_id[n].first):
                report["link_violations"].append((c.id, n))

    report["ok"] = not (report["waypoint_violations"] or report["heading_violations"]
                        or report["link_violations"])
    if report["dead_ends"]:
        LOG.warning("network has %d dead-end containers: %s",
                    len(report["dead_ends"]), report["dead_ends"][:10])
    return report


# ================================================================== #
#  Serialization
# ================================================================== #

def network_to_dict(network):
    return {
        "format_version": FORMAT_VERSION,
        "config": network.config,
        "center": list(network.center),
        "half_extent": network.half_extent,
        "containers": [
            {
                "id": c.id,
                "waypoints": [{"position": list(w.position), "heading": w.heading}
                              for w in c.waypoints],
                "next_ways": list(c.next_ways),
                "origin_signal": c.origin_signal,
                "dest_signal": c.dest_signal,
                "approach": c.approach,
            }
            for c in network.containers
        ],
        "signals": [
            {
                "id": s.id,
                "position": list(s.position),
                "kind": s.kind,
                "stop_lines": [
                    {"container_id": l.container_id, "position": list(l.position),
                     "direction": list(l.direction), "pair": l.pair}
                    for l in s.stop_lines
                ],
            }
            for s in network.signals
        ],
        "obstacles": [
            {"id": o.id, "kind": o.kind, "center": list(o.center),
             "half_extents": list(o.half_extents), "yaw": o.yaw}
            for o in network.obstacles
        ],
    }


def network_from_dict(data):
    if data.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported network format_version {data.get('format_version')!r}")
    containers = [
        PathContainer(
            id=c["id"],
            waypoints=[Waypoint(tuple(w["position"]), w["heading"], c["id"]) for w in c["waypoints"]],
            next_ways=list(c["next_ways"]),
            origin_signal=c["origin_signal"],
            dest_signal=c["dest_signal"],
            approach=c["approach"],
        )
        for c in data["containers"]
    ]
    signals = [
        SignalSite(
            id=s["id"],
            position=tuple(s["position"]),
            kind=s["kind"],
            stop_lines=[StopLine(l["container_id"], tuple(l["position"]),
                                 tuple(l["direction"]), l["pair"]) for l in s["stop_lines"]],
        )
        for s in data["signals"]
    ]
    obstacles = [Obstacle(o["id"], o["kind"], tuple(o["center"]), tuple(o["half_extents"]), o["yaw"])
                 for o in data["obstacles"]]
    return RoadNetwork(containers, signals, obstacles, tuple(data["center"]),
                       data["half_extent"], data["config"])


def dumps_network(network):
    return json.dumps(network_to_dict(network), indent=2, sort_keys=True)


def loads_network(text):
    return network_from_dict(json.loads(text))


def save_network(network, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_network(network))
    return path


def load_network(path):
    return loads_network(Path(path).read_text())
