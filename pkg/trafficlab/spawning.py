"""
Vehicle Spawning
Places vehicles on the first waypoint of every container, cycle after cycle,
with an extra vehicle 40% along long first segments under intense traffic.
Occupied spots (within one vehicle length) are skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np

from trafficlab.dynamics import VEHICLE_LENGTH, VehicleParams, VehicleState
from trafficlab.errors import InvalidParameter
from trafficlab.rng import SPAWNING, derive_generator

LOG = logging.getLogger(__name__)

# (car_power, wheelbase); max steer follows from the wheelbase
VEHICLE_PROFILES = (
    (90.0, 3.2),
    (120.0, 2.8),
    (150.0, 2.6),
    (200.0, 3.0),
)


def profile_params(index, speed_limit=30.0):
    car_power, wheelbase = VEHICLE_PROFILES[index]
    return VehicleParams(car_power=car_power, wheelbase=wheelbase, speed_limit=speed_limit)


@dataclass(frozen=True)
class SpawnConfig:
    intense_traffic: bool = True
    cycles: int = 50
    extra_spawn_fraction: float = 0.40
    min_gap_distance: float = 50.0
    cycle_interval: float = 0.0
    max_vehicles: int | None = None
    clearance: float = VEHICLE_LENGTH

    def __post_init__(self):
        if self.cycles < 1:
            raise InvalidParameter(f"cycles must be >= 1, got {self.cycles}")
        if not 0.0 < self.extra_spawn_fraction < 1.0:
            raise InvalidParameter(f"extra_spawn_fraction {self.extra_spawn_fraction} outside (0, 1)")
        if self.cycle_interval < 0.0:
            raise InvalidParameter("cycle_interval must be >= 0")
        if self.max_vehicles is not None and self.max_vehicles < 0:
            raise InvalidParameter("max_vehicles must be >= 0")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data or {}) - known
        if unknown:
            raise InvalidParameter(f"unknown spawn keys: {sorted(unknown)}")
        return cls(**(data or {}))

    def cycle_time(self, cycle):
        return cycle * self.cycle_interval


@dataclass(frozen=True)
class Placement:
    container_id: int
    position: tuple
    yaw: float
    profile: int
    extra: bool = False
    waypoint_index: int = 1


def _free(spot, occupied, clearance):
    if not occupied:
        return True
    pts = np.asarray(occupied)
    return bool(np.min(np.hypot(pts[:, 0] - spot[0], pts[:, 1] - spot[1])) >= clearance)


def plan_cycle(network, spawn, rng, occupied=(), budget=None):
    """Placements for one spawn cycle, in container id order.

    occupied holds (x, z) of vehicles already on the road; the spots of this
    cycle's placements are added as they are made.
    """
    taken = [tuple(p) for p in occupied]
    out = []
    for container in network.containers:
        if budget is not None and len(out) >= budget:
            break
        first = container.first
        spot = (float(first.position[0]), float(first.position[2]))
        if _free(spot, taken, spawn.clearance):
            out.append(Placement(container.id, spot, first.heading, int(rng.integers(len(VEHICLE_PROFILES)))))
            taken.append(spot)

        if not spawn.intense_traffic or container.first_segment_length <= spawn.min_gap_distance:
            continue
        if budget is not None and len(out) >= budget:
            break
        a, b = container.waypoints[0].xz, container.waypoints[1].xz
        extra = a + spawn.extra_spawn_fraction * (b - a)
        spot = (float(extra[0]), float(extra[1]))
        if _free(spot, taken, spawn.clearance):
            out.append(Placement(container.id, spot, first.heading,
                                 int(rng.integers(len(VEHICLE_PROFILES))), extra=True))
            taken.append(spot)
    return out


def spawn_vehicles(network, spawn, rng_seed, speed_limit=30.0):
    """Run every spawn cycle on a static network and return the vehicles.

    Nothing moves between cycles, so later cycles only fill spots left free
    by earlier ones; the engine runs the same cycles spread over time.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else derive_generator(rng_seed, SPAWNING)
    vehicles = []
    occupied = []
    for cycle in range(spawn.cycles):
        budget = None if spawn.max_vehicles is None else spawn.max_vehicles - len(vehicles)
        if budget is not None and budget <= 0:
            break
        placed = plan_cycle(network, spawn, rng, occupied, budget)
        LOG.debug("spawn cycle %d placed %d vehicles", cycle, len(placed))
        for p in placed:
            vehicles.append(VehicleState(
                id=len(vehicles), position=(p.position[0], 0.0, p.position[1]), yaw=p.yaw,
                path_id=p.container_id, waypoint_index=p.waypoint_index,
                params=profile_params(p.profile, speed_limit),
            ))
            occupied.append(p.position)
    return vehicles
