"""
Sensing
Three forward raycasts per vehicle (center plus two short side rays), cast
on a staggered 4-frame cohort, converted to a brake factor; plus the
speed-limit brake floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from trafficlab.errors import InvalidParameter
from trafficlab.geometry import forward, ray_rect_distances

MAX_BRAKE_FACTOR = 6000.0


class RayWhich(str, Enum):
    CENTER = "center"
    LEFT = "left"
    RIGHT = "right"


class TargetKind(str, Enum):
    VEHICLE = "vehicle"
    OBSTACLE = "obstacle"
    NONE = "none"


@dataclass(frozen=True)
class RayConfig:
    center_range: float = 6.0
    side_range: float = 2.0
    side_angle: float = math.degrees(math.atan(0.75))
    frame_cycle: int = 4
    speed_limit_brake: float = 1000.0

    def __post_init__(self):
        if self.center_range <= 0 or self.side_range <= 0:
            raise InvalidParameter("ray ranges must be positive")
        if self.frame_cycle < 1:
            raise InvalidParameter("frame_cycle must be >= 1")

    def range_of(self, which):
        return self.center_range if which is RayWhich.CENTER else self.side_range

    @property
    def ranges(self):
        return np.array([self.center_range, self.side_range, self.side_range])


@dataclass(frozen=True)
class RayHit:
    which: RayWhich
    distance: float = math.inf
    target_kind: TargetKind = TargetKind.NONE


RAY_ORDER = (RayWhich.CENTER, RayWhich.LEFT, RayWhich.RIGHT)


def ray_directions(yaw, steer, config):
    """Unit directions (n, 3, 2) of the center, left and right rays."""
    headings = np.stack([yaw + steer, yaw - config.side_angle, yaw + config.side_angle], axis=-1)
    r = np.radians(headings)
    return np.stack([np.sin(r), np.cos(r)], axis=-1)


def cohort_mask(ids, tick_index, frame_cycle=4):
    """Vehicles whose rays are cast this frame (id phase-offset stagger)."""
    return (np.asarray(ids) % frame_cycle) == (tick_index % frame_cycle)


def cast_fleet_rays(origins, directions, side_enabled, config, owners,
                    vehicles, obstacles, vehicle_pairs=None, obstacle_pairs=None):
    """Nearest hit distance and target kind for every ray of every caster.

    origins (n, 2), directions (n, 3, 2); owners are the casters' vehicle ids
    so a vehicle never sees itself. Pairs are (caster index, rect index)
    candidate arrays; all pairs are tested when omitted.
    Returns distances (n, 3) with inf for no hit and kinds (n, 3) as int
    codes 0 none, 1 vehicle, 2 obstacle.
    """
    n = len(origins)
    dist = np.full((n, 3), np.inf)
    kind = np.zeros((n, 3), dtype=np.int8)
    ranges = config.ranges

    for rects, pairs, code in ((vehicles, vehicle_pairs, 1), (obstacles, obstacle_pairs, 2)):
        if rects is None or len(rects) == 0 or n == 0:
            continue
        if pairs is None:
            qi = np.repeat(np.arange(n), len(rects))
            ei = np.tile(np.arange(len(rects)), n)
        else:
            qi, ei = pairs
        if code == 1:
            keep = rects.ids[ei] != owners[qi]
            qi, ei = qi[keep], ei[keep]
        if len(qi) == 0:
            continue
        for r in range(3):
            d = ray_rect_distances(origins[qi], directions[qi, r], ranges[r],
                                   rects.centers[ei], rects.half_extents[ei], rects.yaws[ei])
            best = np.full(n, np.inf)
            np.minimum.at(best, qi, d)
            closer = best < dist[:, r]
            dist[closer, r] = best[closer]
            kind[closer, r] = code

    disabled = ~np.asarray(side_enabled, dtype=bool)
    dist[disabled, 1:] = np.inf
    kind[disabled, 1:] = 0
    return dist, kind


def brake_factors(distances, config):
    """Max over rays of 6000 * (1 - d / range); no hit contributes 0."""
    ranges = config.ranges
    finite = np.isfinite(distances)
    per_ray = np.where(finite, MAX_BRAKE_FACTOR * (1.0 - np.where(finite, distances, 0.0) / ranges), 0.0)
    return np.clip(per_ray, 0.0, MAX_BRAKE_FACTOR).max(axis=-1)


def enforce_speed_limits(speed, speed_limit, factor, config):
    over = speed > speed_limit
    return np.where(over, np.maximum(factor, config.speed_limit_brake), factor)


# ================================================================== #
#  Scalar API
# ================================================================== #

def cast_rays(state, vehicles, obstacles=None, config=None):
    """Three RayHit for one vehicle against RectSets of vehicles and obstacles."""
    config = config or RayConfig()
    fwd = forward(state.yaw)
    origin = state.xz + fwd * (state.params.length / 2.0)
    dirs = ray_directions(np.array([state.yaw]), np.array([state.steer_angle]), config)
    enabled = np.array([not state.severity.side_rays_disabled])
    dist, kind = cast_fleet_rays(origin[None, :], dirs, enabled, config, np.array([state.id]),
                                 vehicles, obstacles)
    kinds = {0: TargetKind.NONE, 1: TargetKind.VEHICLE, 2: TargetKind.OBSTACLE}
    return tuple(RayHit(w, float(dist[0, r]), kinds[int(kind[0, r])]) for r, w in enumerate(RAY_ORDER))


def brake_factor_from_hits(hits, config=None):
    config = config or RayConfig()
    best = 0.0
    for hit in hits:
        if hit.target_kind is TargetKind.NONE or not math.isfinite(hit.distance):
            continue
        factor = MAX_BRAKE_FACTOR * (1.0 - hit.distance / config.range_of(hit.which))
        best = max(best, min(MAX_BRAKE_FACTOR, max(0.0, factor)))
    return best


def enforce_speed_limit(state, factor=None, config=None):
    """Brake factor after the speed-limit floor; obstacle braking wins when larger."""
    config = config or RayConfig()
    factor = state.brake_factor if factor is None else factor
    if state.speed > state.params.speed_limit:
        return max(factor, config.speed_limit_brake)
    return factor
