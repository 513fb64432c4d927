"""
Vehicle Dynamics
Longitudinal torque model, pure-pursuit style steering, kinematic bicycle
integration at a fixed 0.02 s step and waypoint navigation. The scalar
operations and the Fleet (struct-of-arrays) share the same array kernels,
so a vehicle stepped alone or inside a fleet ends up bit-identical.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from trafficlab.collision import CollisionSeverityState
from trafficlab.errors import DegenerateTarget, InvalidParameter

LOG = logging.getLogger(__name__)

DT = 0.02
TORQUE_MULTIPLIER = 30.0
STOPPED_SPEED = 0.1
WAYPOINT_REACHED = 5.0
VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 1.9


def max_steer_for_wheelbase(wheelbase):
    return float(min(72.0, max(35.0, 35.0 + (3.5 - wheelbase) * 20.0)))


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 4000.0
    car_power: float = 120.0
    brake_power: float = 8.0
    speed_limit: float = 30.0
    max_steer_angle: float | None = None
    wheel_radius: float = 0.35
    wheelbase: float = 2.8
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH
    # recorded for completeness; the planar model applies no force from these
    com_y_offset: float = -0.05
    suspension_spring: float = 25000.0
    suspension_damper: float = 1500.0
    suspension_distance: float = 0.05
    wheel_mass: float = 1500.0

    def __post_init__(self):
        if self.max_steer_angle is None:
            object.__setattr__(self, "max_steer_angle", max_steer_for_wheelbase(self.wheelbase))
        checks = [
            ("car_power", 60.0, 200.0),
            ("brake_power", 5.0, 10.0),
            ("speed_limit", 20.0, 35.0),
            ("max_steer_angle", 35.0, 72.0),
            ("suspension_spring", 10000.0, 60000.0),
            ("suspension_damper", 1000.0, 6000.0),
        ]
        for name, lo, hi in checks:
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise InvalidParameter(f"{name}={value} outside [{lo}, {hi}]")
        if self.wheel_radius <= 0 or self.wheelbase <= 0 or self.mass <= 0:
            raise InvalidParameter("mass, wheel_radius and wheelbase must be positive")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in (data or {}).items() if k in known})


@dataclass(frozen=True)
class VehicleState:
    id: int
    position: tuple
    yaw: float
    speed: float = 0.0
    path_id: int = 0
    waypoint_index: int = 0
    steer_angle: float = 0.0
    brake_factor: float = 0.0
    stopped_timer: float = 0.0
    alive: bool = True
    severity: CollisionSeverityState = field(default_factory=CollisionSeverityState)
    params: VehicleParams = field(default_factory=VehicleParams)

    @property
    def xz(self):
        return np.array([self.position[0], self.position[2]])


# ================================================================== #
#  Array kernels
# ================================================================== #

def steering_angles(x, z, yaw, tx, tz, max_steer):
    """Steer (degrees) toward targets; 0 where the target coincides."""
    r = np.radians(yaw)
    s, c = np.sin(r), np.cos(r)
    dx, dz = tx - x, tz - z
    local_x = dx * c - dz * s
    local_z = dx * s + dz * c
    norm = np.hypot(local_x, local_z)
    ratio = np.where(norm < 1e-9, 0.0, local_x / np.where(norm < 1e-9, 1.0, norm))
    return np.clip(ratio, -1.0, 1.0) * max_steer


def motor_torques(speed, car_power, speed_limit, braking):
    falloff = np.maximum(0.0, 1.0 - speed / speed_limit)
    return np.where(braking, 0.0, car_power * TORQUE_MULTIPLIER * falloff)


def integrate(x, z, yaw, speed, steer, brake, stopped, car_power, brake_power,
              speed_limit, wheel_radius, wheelbase, mass, dt=DT):
    """One semi-implicit step: speed first, then yaw and position."""
    braking = brake > 0.0
    motor = motor_torques(speed, car_power, speed_limit, braking)
    brake_t = brake_power * brake
    accel = (2.0 * motor / wheel_radius - 4.0 * brake_t / wheel_radius) / mass
    new_speed = np.maximum(0.0, speed + accel * dt)

    new_yaw = (yaw + np.degrees(new_speed / wheelbase * np.tan(np.radians(steer)) * dt)) % 360.0
    r = np.radians(new_yaw)
    new_x = x + new_speed * dt * np.sin(r)
    new_z = z + new_speed * dt * np.cos(r)
    new_stopped = np.where(new_speed < STOPPED_SPEED, stopped + dt, 0.0)
    return new_x, new_z, new_yaw, new_speed, new_stopped


# ================================================================== #
#  Scalar operations
# ================================================================== #

def steering_angle(state, target_position, params=None):
    params = params or state.params
    tx, tz = _xz(target_position)
    r = math.radians(state.yaw)
    dx, dz = tx - state.position[0], tz - state.position[2]
    if math.hypot(dx * math.cos(r) - dz * math.sin(r), dx * math.sin(r) + dz * math.cos(r)) < 1e-9:
        raise DegenerateTarget(f"vehicle {state.id}: target coincides with position")
    out = steering_angles(np.array([state.position[0]]), np.array([state.position[2]]),
                          np.array([state.yaw]), np.array([tx]), np.array([tz]),
                          np.array([params.max_steer_angle]))
    return float(out[0])


def motor_torque(speed, params, brake_factor=0.0):
    return float(motor_torques(np.array([speed]), params.car_power, params.speed_limit,
                               np.array([brake_factor > 0.0]))[0])


def brake_torque(brake_factor, params):
    return float(params.brake_power * brake_factor)


def step_vehicle(state, dt=DT, params=None):
    params = params or state.params
    if not state.alive:
        return state
    out = integrate(
        np.array([state.position[0]]), np.array([state.position[2]]), np.array([state.yaw]),
        np.array([state.speed]), np.array([state.steer_angle]), np.array([state.brake_factor]),
        np.array([state.stopped_timer]), params.car_power, params.brake_power,
        params.speed_limit, params.wheel_radius, params.wheelbase, params.mass, dt,
    )
    x, z, yaw, speed, stopped = (float(v[0]) for v in out)
    return replace(state, position=(x, 0.0, z), yaw=yaw, speed=speed, stopped_timer=stopped)


def advance_navigation(state, network, rng):
    """Advance the waypoint cursor; pick a random next way past the last waypoint."""
    container = network.container(state.path_id)
    target = container.waypoints[state.waypoint_index]
    if float(np.hypot(*(state.xz - target.xz))) >= WAYPOINT_REACHED:
        return state

    path_id, index = state.path_id, state.waypoint_index + 1
    position, yaw, speed = state.position, state.yaw, state.speed
    if index >= len(container.waypoints):
        if container.next_ways:
            path_id = container.next_ways[int(rng.integers(len(container.next_ways)))]
            index = 0
        else:
            LOG.debug("vehicle %s respawns at dead end %s", state.id, container.id)
            first = container.waypoints[0]
            position, yaw, speed, index = first.position, first.heading, 0.0, 1
    moved = replace(state, path_id=path_id, waypoint_index=index, position=position,
                    yaw=yaw, speed=speed)
    goal = network.container(path_id).waypoints[index]
    try:
        steer = steering_angle(moved, goal.position)
    except DegenerateTarget:
        steer = 0.0
    return replace(moved, steer_angle=steer)


def _xz(p):
    p = tuple(p)
    return (float(p[0]), float(p[2])) if len(p) == 3 else (float(p[0]), float(p[1]))


# ================================================================== #
#  Fleet
# ================================================================== #

_FLOAT_COLUMNS = ("x", "z", "yaw", "speed", "steer", "brake", "sensed_brake", "stopped",
                  "car_power", "brake_power", "speed_limit", "wheel_radius", "wheelbase",
                  "max_steer", "mass", "half_length", "half_width", "stop_d")
# watch: container whose stop line the vehicle is approaching (-1 none)
_INT_COLUMNS = ("path", "wp_index", "profile", "watch", "watched_path")


class Fleet:
    """Struct-of-arrays vehicle store; vehicle id == row index."""

    def __init__(self, capacity=64):
        self.size = 0
        self._capacity = 0
        for name in _FLOAT_COLUMNS:
            setattr(self, name, np.zeros(0))
        for name in _INT_COLUMNS:
            setattr(self, name, np.zeros(0, dtype=np.int64))
        self.alive = np.zeros(0, dtype=bool)
        self.severity = []
        self._grow(capacity)

    def __len__(self):
        return self.size

    def _grow(self, capacity):
        for name in _FLOAT_COLUMNS + _INT_COLUMNS + ("alive",):
            old = getattr(self, name)
            new = np.zeros(capacity, dtype=old.dtype)
            new[: self.size] = old[: self.size]
            setattr(self, name, new)
        self._capacity = capacity

    def add(self, params, position, yaw, path_id, waypoint_index, profile=0, speed=0.0):
        if self.size == self._capacity:
            self._grow(max(64, self._capacity * 2))
        i = self.size
        self.x[i], self.z[i] = _xz(position)
        self.yaw[i] = yaw
        self.speed[i] = speed
        self.path[i] = path_id
        self.wp_index[i] = waypoint_index
        self.profile[i] = profile
        self.car_power[i] = params.car_power
        self.brake_power[i] = params.brake_power
        self.speed_limit[i] = params.speed_limit
        self.wheel_radius[i] = params.wheel_radius
        self.wheelbase[i] = params.wheelbase
        self.max_steer[i] = params.max_steer_angle
        self.mass[i] = params.mass
        self.half_length[i] = params.length / 2.0
        self.half_width[i] = params.width / 2.0
        self.watch[i] = -1
        self.watched_path[i] = -1
        self.alive[i] = True
        self.severity.append(CollisionSeverityState())
        self.size += 1
        return i

    def view(self, name):
        return getattr(self, name)[: self.size]

    def active_ids(self):
        return np.flatnonzero(self.alive[: self.size])

    def positions(self):
        return np.stack([self.x[: self.size], self.z[: self.size]], axis=1)

    def state(self, i, params=None):
        """Snapshot of one vehicle as a VehicleState."""
        return VehicleState(
            id=int(i), position=(float(self.x[i]), 0.0, float(self.z[i])),
            yaw=float(self.yaw[i]), speed=float(self.speed[i]), path_id=int(self.path[i]),
            waypoint_index=int(self.wp_index[i]), steer_angle=float(self.steer[i]),
            brake_factor=float(self.brake[i]), stopped_timer=float(self.stopped[i]),
            alive=bool(self.alive[i]), severity=self.severity[i],
            params=params or VehicleParams(
                car_power=float(self.car_power[i]), brake_power=float(self.brake_power[i]),
                speed_limit=float(self.speed_limit[i]), wheel_radius=float(self.wheel_radius[i]),
                wheelbase=float(self.wheelbase[i]), max_steer_angle=float(self.max_steer[i]),
                mass=float(self.mass[i]),
            ),
        )

    def integrate(self, ids, dt=DT):
        if len(ids) == 0:
            return
        out = integrate(
            self.x[ids], self.z[ids], self.yaw[ids], self.speed[ids], self.steer[ids],
            self.brake[ids], self.stopped[ids], self.car_power[ids], self.brake_power[ids],
            self.speed_limit[ids], self.wheel_radius[ids], self.wheelbase[ids], self.mass[ids], dt,
        )
        self.x[ids], self.z[ids], self.yaw[ids], self.speed[ids], self.stopped[ids] = out

    def steer_toward(self, ids, targets):
        if len(ids) == 0:
            return
        self.steer[ids] = steering_angles(self.x[ids], self.z[ids], self.yaw[ids],
                                          targets[:, 0], targets[:, 1], self.max_steer[ids])

    def advance_navigation(self, ids, arrays, rng):
        """Vectorized advance_navigation; path draws happen in ascending id order.

        Returns (ids that switched container, ids that respawned at a dead end).
        """
        empty = np.zeros(0, dtype=np.int64)
        if len(ids) == 0:
            return empty, empty
        targets = arrays.target(self.path[ids], self.wp_index[ids])
        reached = np.hypot(self.x[ids] - targets[:, 0], self.z[ids] - targets[:, 1]) < WAYPOINT_REACHED
        hit = ids[reached]
        if len(hit) == 0:
            return empty, empty
        self.wp_index[hit] += 1
        past = hit[self.wp_index[hit] >= arrays.counts[self.path[hit]]]
        switched, respawned = [], []
        for i in past:
            p = self.path[i]
            n = arrays.next_counts[p]
            if n > 0:
                choice = int(rng.integers(n))
                self.path[i] = arrays.next_flat[arrays.next_offsets[p] + choice]
                self.wp_index[i] = 0
                switched.append(i)
            else:
                first = arrays.offsets[p]
                self.x[i], self.z[i] = arrays.wp_xy[first]
                self.yaw[i] = arrays.wp_heading[first]
                self.speed[i] = 0.0
                self.wp_index[i] = 1
                self.watch[i] = -1
                self.watched_path[i] = -1
                respawned.append(i)
                LOG.debug("vehicle %d respawns at dead end %d", i, p)
        self.steer_toward(hit, arrays.target(self.path[hit], self.wp_index[hit]))
        return np.array(switched, dtype=np.int64), np.array(respawned, dtype=np.int64)
