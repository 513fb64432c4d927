"""
Metrics
Per-vehicle accumulators (distance, stopped time, speed bins, collisions),
global counters, the fuel / CO2 surrogate model and the CSV writers for the
vehicle, collision, signal and timeline logs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from trafficlab.collision import COLLISION_LOG_COLUMNS
from trafficlab.errors import InvalidParameter, MetricsWriteError, ZeroDistance
from trafficlab.signals import SIGNAL_LOG_COLUMNS

LOG = logging.getLogger(__name__)

STOPPED_SPEED = 0.1
BIN_WIDTH = 5.0
BIN_COUNT = 7
BIN_LABELS = tuple(f"bin_{5 * k}_{5 * (k + 1)}" for k in range(BIN_COUNT))
FLOAT_FORMAT = "%.6f"

VEHICLE_COLUMNS = [
    "capture_time", "vehicle_id", "alive", "spawn_time", "removed_time", "alive_time",
    "distance_total", "stopped_total", "stopped_current_streak", "stopped_longest",
    *BIN_LABELS,
    "fuel_gallons", "co2_grams", "fuel_gal_per_mile", "co2_g_per_mile",
    "vv_collisions", "vnv_collisions", "serious_collisions",
]

TIMELINE_COLUMNS = ["time", "active", "removed", "spawned", "mean_stopped_total",
                    "total_distance", "vv", "vnv", "serious", "pass_throughs"]


def bin_speed(speed):
    """Speed-bin index 0..6; speeds at or above 35 land in the last bin."""
    if speed <= 0.0:
        return 0
    return min(int(speed // BIN_WIDTH), BIN_COUNT - 1)


def bin_speeds(speeds):
    speeds = np.asarray(speeds, dtype=float)
    return np.clip((np.maximum(speeds, 0.0) // BIN_WIDTH).astype(np.int64), 0, BIN_COUNT - 1)


# ------------------------------------------------------------------ #
#  Fuel / CO2 surrogate
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class FuelModel:
    idle_gph: float = 0.3
    move_gpm: float = 0.04
    unit_to_mile: float = 1.0 / 1609.34
    co2_grams_per_gallon: float = 8887.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InvalidParameter(f"fuel model {f.name} must be >= 0")

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))

    def arrays(self, distance, stopped):
        """(gallons, co2 grams, gal/mile, g/mile); per-mile is NaN at zero distance."""
        miles = np.asarray(distance, dtype=float) * self.unit_to_mile
        gallons = self.idle_gph * np.asarray(stopped, dtype=float) / 3600.0 + self.move_gpm * miles
        co2 = gallons * self.co2_grams_per_gallon
        moved = miles > 0.0
        safe = np.where(moved, miles, 1.0)
        return gallons, co2, np.where(moved, gallons / safe, np.nan), np.where(moved, co2 / safe, np.nan)


@dataclass(frozen=True)
class VehicleMetrics:
    vehicle_id: int = 0
    distance_total: float = 0.0
    stopped_total: float = 0.0
    stopped_current_streak: float = 0.0
    stopped_longest: float = 0.0
    bins: tuple = (0.0,) * BIN_COUNT
    alive_time: float = 0.0
    spawn_time: float = 0.0
    removed_time: float | None = None
    vv_collisions: int = 0
    vnv_collisions: int = 0
    serious_collisions: int = 0


@dataclass(frozen=True)
class GlobalMetrics:
    vv_collisions: int = 0
    vnv_collisions: int = 0
    serious_collisions: int = 0
    total_collisions: int = 0
    pass_throughs: int = 0
    removed_vehicles: int = 0
    active_vehicles: int = 0
    spawned_vehicles: int = 0


def estimate_fuel_co2(metrics, model=None):
    """Fuel gallons/mile and CO2 grams/mile of one vehicle.

    Raises ZeroDistance (carrying the absolute gallons and grams) when the
    vehicle never moved.
    """
    model = model or FuelModel()
    gallons, co2, gpm, cpm = (float(v) for v in model.arrays(metrics.distance_total, metrics.stopped_total))
    if math.isnan(gpm):
        raise ZeroDistance(gallons, co2)
    return {"fuel_gallons": gallons, "co2_grams": co2, "fuel_gal_per_mile": gpm, "co2_g_per_mile": cpm}


# ================================================================== #
#  Recorder
# ================================================================== #

class MetricsRecorder:
    """Struct-of-arrays accumulators indexed by vehicle id."""

    def __init__(self, fuel_model=None, capacity=64):
        self.fuel_model = fuel_model or FuelModel()
        self.size = 0
        self.spawn_time = np.zeros(capacity)
        self.removed_time = np.full(capacity, np.nan)
        self.alive_time = np.zeros(capacity)
        self.distance = np.zeros(capacity)
        self.stopped_total = np.zeros(capacity)
        self.stopped_streak = np.zeros(capacity)
        self.stopped_longest = np.zeros(capacity)
        self.bins = np.zeros((capacity, BIN_COUNT))
        self.vv = np.zeros(capacity, dtype=np.int64)
        self.vnv = np.zeros(capacity, dtype=np.int64)
        self.serious = np.zeros(capacity, dtype=np.int64)
        self.pass_throughs = 0
        self.timeline = []

    def _grow(self, capacity):
        for name in ("spawn_time", "removed_time", "alive_time", "distance", "stopped_total",
                     "stopped_streak", "stopped_longest", "bins", "vv", "vnv", "serious"):
            old = getattr(self, name)
            shape = (capacity,) + old.shape[1:]
            new = np.full(shape, np.nan) if name == "removed_time" else np.zeros(shape, dtype=old.dtype)
            new[: self.size] = old[: self.size]
            setattr(self, name, new)

    def on_spawn(self, vehicle_id, time):
        if vehicle_id != self.size:
            raise InvalidParameter(f"vehicle ids must be dense; expected {self.size}, got {vehicle_id}")
        if self.size == len(self.spawn_time):
            self._grow(max(64, 2 * self.size))
        self.spawn_time[vehicle_id] = time
        self.size += 1

    def on_removed(self, vehicle_id, time):
        self.removed_time[vehicle_id] = time

    def on_collision(self, vehicle_id, vehicle_vehicle):
        if vehicle_vehicle:
            self.vv[vehicle_id] += 1
        else:
            self.vnv[vehicle_id] += 1

    def on_serious(self, vehicle_id):
        self.serious[vehicle_id] += 1

    def record(self, ids, speeds, dt):
        """Accumulate one tick for the alive vehicles `ids` at `speeds`."""
        if len(ids) == 0:
            return
        speeds = np.asarray(speeds, dtype=float)
        self.alive_time[ids] += dt
        self.distance[ids] += speeds * dt
        np.add.at(self.bins, (ids, bin_speeds(speeds)), dt)
        stopped = speeds < STOPPED_SPEED
        self.stopped_total[ids] += np.where(stopped, dt, 0.0)
        self.stopped_streak[ids] = np.where(stopped, self.stopped_streak[ids] + dt, 0.0)
        self.stopped_longest[ids] = np.maximum(self.stopped_longest[ids], self.stopped_streak[ids])

    # ------------------------------------------------------------------ #
    #  Views
    # ------------------------------------------------------------------ #

    def vehicle(self, i):
        removed = float(self.removed_time[i])
        return VehicleMetrics(
            vehicle_id=int(i), distance_total=float(self.distance[i]),
            stopped_total=float(self.stopped_total[i]),
            stopped_current_streak=float(self.stopped_streak[i]),
            stopped_longest=float(self.stopped_longest[i]),
            bins=tuple(float(b) for b in self.bins[i]), alive_time=float(self.alive_time[i]),
            spawn_time=float(self.spawn_time[i]), removed_time=None if math.isnan(removed) else removed,
            vv_collisions=int(self.vv[i]), vnv_collisions=int(self.vnv[i]),
            serious_collisions=int(self.serious[i]),
        )

    def global_metrics(self):
        n = self.size
        removed = int(np.count_nonzero(~np.isnan(self.removed_time[:n])))
        vv, vnv = int(self.vv[:n].sum()), int(self.vnv[:n].sum())
        return GlobalMetrics(
            vv_collisions=vv, vnv_collisions=vnv, serious_collisions=int(self.serious[:n].sum()),
            total_collisions=vv + vnv, pass_throughs=int(self.pass_throughs),
            removed_vehicles=removed, active_vehicles=n - removed, spawned_vehicles=n,
        )

    def totals(self):
        """Cumulative sums the reward window deltas are taken from."""
        n = self.size
        return {
            "stopped": float(self.stopped_total[:n].sum()),
            "distance": float(self.distance[:n].sum()),
            "bin_25_30": float(self.bins[:n, 5].sum()),
            "passes": int(self.pass_throughs),
            "serious": int(self.serious[:n].sum()),
            "vehicle_collisions": int(self.vv[:n].sum()),
        }

    def capture(self, time):
        """One row per spawned vehicle, ordered by id."""
        n = self.size
        gallons, co2, gpm, cpm = self.fuel_model.arrays(self.distance[:n], self.stopped_total[:n])
        frame = pd.DataFrame({
            "capture_time": np.full(n, float(time)),
            "vehicle_id": np.arange(n, dtype=np.int64),
            "alive": np.isnan(self.removed_time[:n]).astype(np.int64),
            "spawn_time": self.spawn_time[:n],
            "removed_time": self.removed_time[:n],
            "alive_time": self.alive_time[:n],
            "distance_total": self.distance[:n],
            "stopped_total": self.stopped_total[:n],
            "stopped_current_streak": self.stopped_streak[:n],
            "stopped_longest": self.stopped_longest[:n],
            **{label: self.bins[:n, k] for k, label in enumerate(BIN_LABELS)},
            "fuel_gallons": gallons,
            "co2_grams": co2,
            "fuel_gal_per_mile": gpm,
            "co2_g_per_mile": cpm,
            "vv_collisions": self.vv[:n],
            "vnv_collisions": self.vnv[:n],
            "serious_collisions": self.serious[:n],
        })
        return frame[VEHICLE_COLUMNS]

    def timeline_row(self, time):
        g = self.global_metrics()
        n = self.size
        row = {
            "time": float(time),
            "active": g.active_vehicles,
            "removed": g.removed_vehicles,
            "spawned": g.spawned_vehicles,
            "mean_stopped_total": float(self.stopped_total[:n].mean()) if n else 0.0,
            "total_distance": float(self.distance[:n].sum()),
            "vv": g.vv_collisions,
            "vnv": g.vnv_collisions,
            "serious": g.serious_collisions,
            "pass_throughs": g.pass_throughs,
        }
        self.timeline.append(row)
        return row


def record_tick(world, dt):
    """Accumulate one engine tick of the world's alive vehicles."""
    fleet = world.fleet
    ids = fleet.active_ids()
    world.metrics.record(ids, fleet.speed[ids], dt)
    world.metrics.pass_throughs = sum(c.pass_through_count for c in world.signals)
    return world.metrics


def capture_schedule(duration, interval=None):
    """Capture times: the episode end only, or every `interval` seconds up to it."""
    if not interval:
        return [float(duration)]
    count = int(math.floor(duration / interval + 1e-9))
    times = [round(k * interval, 9) for k in range(1, count + 1)]
    if not times or abs(times[-1] - duration) > 1e-9:
        times.append(float(duration))
    return times


# ================================================================== #
#  CSV writers
# ================================================================== #

def _write_csv(frame, path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    except OSError as e:
        raise MetricsWriteError(path, e) from e
    LOG.debug("wrote %d rows to %s", len(frame), path)
    return path


def write_metrics_csv(captures, path):
    """Write vehicle captures (DataFrames from MetricsRecorder.capture) to one CSV."""
    frames = [c for c in captures if len(c)]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=VEHICLE_COLUMNS)
    return _write_csv(frame[VEHICLE_COLUMNS], Path(path))


def write_collision_log(rows, path):
    frame = pd.DataFrame(rows, columns=COLLISION_LOG_COLUMNS)
    return _write_csv(frame, Path(path))


def write_signal_log(controllers, path):
    frame = pd.DataFrame([c.to_row() for c in controllers], columns=SIGNAL_LOG_COLUMNS)
    return _write_csv(frame, Path(path))


def write_timeline(rows, path):
    frame = pd.DataFrame(rows, columns=TIMELINE_COLUMNS)
    return _write_csv(frame, Path(path))
