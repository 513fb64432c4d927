"""
Simulation Engine
Fixed-timestep scheduler that binds the network, fleet, sensing, collision,
signals and metrics together. The tick order is a frozen contract:

    spawn cycles due -> signals -> sensing cohort + stop-line gating
    -> steering -> integration -> contacts + impulses -> severity + removals
    -> navigation -> metrics -> clock

Simulated time is tick_index * dt; nothing reads the wall clock.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from trafficlab.collision import (
    CollisionKind,
    classify_impact,
    detect_contacts,
    resolve_impulse,
    severity_tick,
)
from trafficlab.dynamics import DT, Fleet
from trafficlab.geometry import RectSet, rect_axes
from trafficlab.metrics import MetricsRecorder, record_tick
from trafficlab.rng import PATHS, SPAWNING, RngStreams
from trafficlab.sensing import (
    MAX_BRAKE_FACTOR,
    RayConfig,
    brake_factors,
    cast_fleet_rays,
    cohort_mask,
    enforce_speed_limits,
    ray_directions,
)
from trafficlab.signals import Light, SignalController, gate_factors, tick_signal
from trafficlab.spatial import UniformGrid
from trafficlab.spawning import plan_cycle, profile_params

LOG = logging.getLogger(__name__)


@dataclass
class SimClock:
    tick_index: int = 0
    dt: float = DT
    time_scale: float = 20.0

    @property
    def sim_time(self):
        return self.tick_index * self.dt

    def ticks_for(self, seconds):
        return int(round(seconds / self.dt))

    def advance(self):
        self.tick_index += 1
        return self


@dataclass(frozen=True)
class SpatialHits:
    vehicles: np.ndarray
    obstacles: np.ndarray


class World:
    """Everything one simulation run mutates, plus its seeded RNG streams."""

    def __init__(self, network, spawn=None, seed=0, ray_config=None, fuel_model=None,
                 speed_limit=30.0, green=30.0, dt=DT):
        self.network = network
        self.arrays = network.arrays
        self.spawn = spawn
        self.streams = RngStreams(seed)
        self.rays = ray_config or RayConfig()
        self.clock = SimClock(dt=dt)
        self.fleet = Fleet()
        self.metrics = MetricsRecorder(fuel_model)
        self.speed_limit = float(speed_limit)
        greens = green if np.ndim(green) else [green] * len(network.signals)
        self.signals = [SignalController.from_site(site, g) for site, g in zip(network.signals, greens)]
        self.obstacles = network.obstacle_rects()
        self.obstacle_grid = UniformGrid().build(self.obstacles)
        self.vehicle_grid = UniformGrid()
        self._grid_tick = -1
        self.next_cycle = 0
        self.closed_episodes = []
        self.open_episodes = {}

    @property
    def sim_time(self):
        return self.clock.sim_time

    def set_speed_limit(self, limit):
        """Global speed limit, applied to every vehicle immediately."""
        self.speed_limit = float(limit)
        self.fleet.view("speed_limit")[:] = self.speed_limit

    # ------------------------------------------------------------------ #
    #  Views
    # ------------------------------------------------------------------ #

    def vehicle_rects(self, ids=None):
        fleet = self.fleet
        ids = fleet.active_ids() if ids is None else ids
        return RectSet(
            ids=ids.astype(np.int64),
            centers=np.stack([fleet.x[ids], fleet.z[ids]], axis=1),
            half_extents=np.stack([fleet.half_length[ids], fleet.half_width[ids]], axis=1),
            yaws=fleet.yaw[ids].copy(),
        )

    def rebuild_index(self):
        self.vehicle_grid.build(self.vehicle_rects())
        self._grid_tick = self.clock.tick_index
        return self.vehicle_grid

    def collision_rows(self, include_open=True):
        """Collision log rows, closed episodes first, both in start order."""
        rows = list(self.closed_episodes)
        if include_open:
            rows += [dict(r) for _, r in sorted(self.open_episodes.items())]
        return sorted(rows, key=lambda r: (r["time"], r["a_id"]))

    def snapshot(self):
        fleet = self.fleet
        return {
            "time": self.sim_time,
            "positions": fleet.positions().copy(),
            "alive": fleet.view("alive").copy(),
            "phases": [int(c.phase) for c in self.signals],
            "metrics": self.metrics.global_metrics(),
        }

    # ------------------------------------------------------------------ #
    #  Running
    # ------------------------------------------------------------------ #

    def run(self, seconds, hash_every=None):
        for _ in range(self.clock.ticks_for(seconds)):
            tick(self)
            if hash_every and self.clock.tick_index % hash_every == 0:
                LOG.debug("tick %d hash %s", self.clock.tick_index, world_hash(self))
        return self


# ================================================================== #
#  Tick stages
# ================================================================== #

def spawn_due(world):
    spawn = world.spawn
    if spawn is None:
        return
    fleet = world.fleet
    now = world.sim_time
    while world.next_cycle < spawn.cycles and spawn.cycle_time(world.next_cycle) <= now + 1e-9:
        budget = None
        if spawn.max_vehicles is not None:
            budget = spawn.max_vehicles - fleet.size
            if budget <= 0:
                world.next_cycle = spawn.cycles
                break
        ids = fleet.active_ids()
        occupied = np.stack([fleet.x[ids], fleet.z[ids]], axis=1) if len(ids) else ()
        placed = plan_cycle(world.network, spawn, world.streams[SPAWNING], occupied, budget)
        for p in placed:
            vid = fleet.add(profile_params(p.profile, world.speed_limit), p.position, p.yaw,
                            p.container_id, p.waypoint_index, profile=p.profile)
            world.metrics.on_spawn(vid, now)
        LOG.debug("t=%.2f spawn cycle %d placed %d (fleet %d)", now, world.next_cycle, len(placed), fleet.size)
        world.next_cycle += 1


def _sense_and_gate(world, ids):
    fleet, rays, arrays = world.fleet, world.rays, world.arrays
    fwd, _ = rect_axes(fleet.yaw[ids])
    fronts = np.stack([fleet.x[ids], fleet.z[ids]], axis=1) + fwd * fleet.half_length[ids][:, None]

    cohort = cohort_mask(ids, world.clock.tick_index, rays.frame_cycle)
    if cohort.any():
        cids = ids[cohort]
        origins = fronts[cohort]
        dirs = ray_directions(fleet.yaw[cids], fleet.steer[cids], rays)
        enabled = np.array([not fleet.severity[i].side_rays_disabled for i in cids], dtype=bool)
        vpairs = world.vehicle_grid.candidates(origins, rays.center_range)
        opairs = world.obstacle_grid.candidates(origins, rays.center_range)
        dist, _ = cast_fleet_rays(origins, dirs, enabled, rays, cids, world.vehicle_grid.rects,
                                  world.obstacles, vpairs, opairs)
        fleet.sensed_brake[cids] = brake_factors(dist, rays)

    # stop-line watch: set on entering a container that ends at a signal,
    # cleared once the front crosses the line
    path = fleet.path[ids]
    fresh = (fleet.watch[ids] < 0) & (path != fleet.watched_path[ids]) & (arrays.dest_signal[path] >= 0)
    if fresh.any():
        new = ids[fresh]
        fleet.watch[new] = fleet.path[new]
        fleet.watched_path[new] = fleet.path[new]
        fleet.stop_d[new] = np.inf

    gate = np.zeros(len(ids))
    watching = fleet.watch[ids] >= 0
    if watching.any():
        wids = ids[watching]
        lines = fleet.watch[wids]
        d = np.einsum("ij,ij->i", arrays.stop_xy[lines] - fronts[watching], arrays.stop_dir[lines])
        sig = arrays.dest_signal[lines]
        light_a = np.array([int(c.light("A")) for c in world.signals], dtype=np.int64)
        light_b = np.array([int(c.light("B")) for c in world.signals], dtype=np.int64)
        lights = np.where(arrays.stop_pair[lines] == 0, light_a[sig], light_b[sig])
        crossed = (fleet.stop_d[wids] > 0.0) & (d <= 0.0)
        for s, light in zip(sig[crossed], lights[crossed]):
            if light == Light.GREEN:
                world.signals[s].pass_through_count += 1
        done = d <= 0.0
        fleet.watch[wids[done]] = -1
        fleet.stop_d[wids] = d
        gate[watching] = np.where(done, 0.0, gate_factors(d, lights))

    brake = np.maximum(fleet.sensed_brake[ids], gate)
    brake = enforce_speed_limits(fleet.speed[ids], fleet.speed_limit[ids], brake, rays)
    fleet.brake[ids] = np.clip(brake, 0.0, MAX_BRAKE_FACTOR)


def _resolve_contacts(world):
    fleet = world.fleet
    ids = fleet.active_ids()
    if len(ids) == 0:
        return {}
    rects = world.vehicle_rects(ids)
    world.vehicle_grid.build(rects)
    world._grid_tick = world.clock.tick_index

    fwd, _ = rect_axes(fleet.yaw[: fleet.size])
    velocities = fwd * fleet.speed[: fleet.size][:, None]
    positions = fleet.positions().copy()
    inv_masses = 1.0 / fleet.mass[: fleet.size]

    vv_pairs = world.vehicle_grid.self_pairs()
    vo_pairs = world.obstacle_grid.candidates(rects.centers, float(rects.radii.max()))
    contacts = detect_contacts(rects, world.obstacles, velocities[ids], vv_pairs, vo_pairs)

    touching = {}
    for c in contacts:
        resolve_impulse(c, velocities, positions, inv_masses)
        if c.b_is_obstacle:
            touching.setdefault(c.a_id, (CollisionKind.VEHICLE_NON_VEHICLE, c.b_id, c.normal))
            continue
        for me, other, sign in ((c.a_id, c.b_id, 1.0), (c.b_id, c.a_id, -1.0)):
            kind = touching.get(me, (None,))[0]
            if kind is not CollisionKind.VEHICLE_VEHICLE:
                touching[me] = (CollisionKind.VEHICLE_VEHICLE, other,
                                (sign * c.normal[0], sign * c.normal[1]))

    if contacts:
        fleet.x[ids], fleet.z[ids] = positions[ids, 0], positions[ids, 1]
        fleet.speed[ids] = np.maximum(0.0, np.einsum("ij,ij->i", velocities[ids], fwd[ids]))
    return touching


def _update_severity(world, touching):
    fleet, metrics = world.fleet, world.metrics
    now = world.sim_time + world.clock.dt
    ids = fleet.active_ids()
    for i in ids:
        i = int(i)
        state = fleet.severity[i]
        hit = touching.get(i)
        if hit is None and not state.in_collision:
            continue
        kind = hit[0] if hit else None
        update = severity_tick(state, world.clock.dt, hit is not None, kind, float(fleet.speed[i]))
        fleet.severity[i] = update.state

        if update.entered:
            vv = update.state.kind is CollisionKind.VEHICLE_VEHICLE
            metrics.on_collision(i, vv)
            partner = int(hit[1])
            impact = classify_impact(float(fleet.yaw[i]), float(fleet.yaw[partner]) if vv else 0.0,
                                     np.asarray(hit[2]), not vv)
            world.open_episodes[i] = {
                "time": round(world.sim_time, 6), "a_id": i, "b_id": partner,
                "kind": update.state.kind.value, "episode_duration": 0.0,
                "serious": False, "removed": False, "impact": impact.value,
            }
        row = world.open_episodes.get(i)
        if row is not None and update.state.in_collision:
            row["episode_duration"] = update.state.episode_duration
        if update.became_serious:
            metrics.on_serious(i)
            row["serious"] = True
        if update.removed:
            fleet.alive[i] = False
            fleet.speed[i] = 0.0
            metrics.on_removed(i, now)
            row["removed"] = True
            world.closed_episodes.append(world.open_episodes.pop(i))
            LOG.debug("vehicle %d removed after %.2f s stopped in collision", i,
                      update.state.stopped_during_collision)
        elif update.exited:
            world.closed_episodes.append(world.open_episodes.pop(i))


def tick(world):
    """Advance the world by one fixed step."""
    fleet, dt = world.fleet, world.clock.dt
    spawn_due(world)

    for controller in world.signals:
        tick_signal(controller, dt)

    ids = fleet.active_ids()
    if len(ids):
        world.rebuild_index()
        _sense_and_gate(world, ids)
        fleet.steer_toward(ids, world.arrays.target(fleet.path[ids], fleet.wp_index[ids]))
        fleet.integrate(ids, dt)

    touching = _resolve_contacts(world)
    _update_severity(world, touching)

    ids = fleet.active_ids()
    fleet.advance_navigation(ids, world.arrays, world.streams[PATHS])
    record_tick(world, dt)
    world.clock.advance()
    return world


# ================================================================== #
#  Queries
# ================================================================== #

def spatial_query(world, position, radius):
    """Alive vehicles and obstacles whose footprints intersect the disc."""
    if world._grid_tick != world.clock.tick_index:
        world.rebuild_index()
    return SpatialHits(world.vehicle_grid.query_disc(position, radius),
                       world.obstacle_grid.query_disc(position, radius))


def world_hash(world):
    """sha256 over the mutable simulation state, for determinism bisection."""
    fleet = world.fleet
    h = hashlib.sha256()
    h.update(np.int64(world.clock.tick_index).tobytes())
    for name in ("x", "z", "yaw", "speed", "steer", "brake", "path", "wp_index", "alive"):
        h.update(np.ascontiguousarray(fleet.view(name)).tobytes())
    for c in world.signals:
        h.update(np.array([c.phase, c.pass_through_count], dtype=np.int64).tobytes())
        h.update(np.array([c.phase_elapsed, c.green_a, c.green_b], dtype=float).tobytes())
    m = world.metrics
    for arr in (m.distance[: m.size], m.stopped_total[: m.size], m.bins[: m.size]):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
