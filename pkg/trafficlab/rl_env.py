"""
Traffic Signal Environment
Gymnasium environment around the engine: 50-vehicle sampled observations,
per-light green duration and global speed-limit actions applied every 60 s,
and the safety-weighted reward computed from window deltas.
"""

from __future__ import annotations

import logging
from dataclasses import astuple, dataclass, fields

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from trafficlab.engine import World, spawn_due
from trafficlab.errors import EpisodeFinished, InvalidParameter
from trafficlab.network import generate_city
from trafficlab.rng import EPISODE_RESET, OBSERVATION_SAMPLING, derive_generator
from trafficlab.signals import MAX_GREEN, MIN_GREEN, Phase, set_green_duration

LOG = logging.getLogger(__name__)

OBSERVED_VEHICLES = 50
SPEED_LIMIT_RANGE = (20.0, 35.0)


@dataclass(frozen=True)
class EpisodeConfig:
    duration: float = 600.0
    decision_interval: float = 60.0
    green_range: tuple = (MIN_GREEN, MAX_GREEN)
    speed_limit_range: tuple = SPEED_LIMIT_RANGE
    observed_vehicles: int = OBSERVED_VEHICLES

    def __post_init__(self):
        ratio = self.duration / self.decision_interval
        if self.decision_interval <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise InvalidParameter(
                f"duration {self.duration} is not a positive multiple of decision_interval {self.decision_interval}"
            )
        lo, hi = self.green_range
        if not MIN_GREEN <= lo <= hi <= MAX_GREEN:
            raise InvalidParameter(f"green_range {self.green_range} outside [{MIN_GREEN}, {MAX_GREEN}]")
        lo, hi = self.speed_limit_range
        if not SPEED_LIMIT_RANGE[0] <= lo <= hi <= SPEED_LIMIT_RANGE[1]:
            raise InvalidParameter(f"speed_limit_range {self.speed_limit_range} outside {SPEED_LIMIT_RANGE}")

    @property
    def decisions(self):
        return int(round(self.duration / self.decision_interval))

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        for key in ("green_range", "speed_limit_range"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


# ------------------------------------------------------------------ #
#  Rewards
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class RewardCoefficients:
    stopped: float = -1e-5
    distance: float = 1e-8
    speed2530: float = 1e-5
    pass_through: float = 0.01
    serious: float = -1.0
    collision: float = -0.01

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))

    def as_vector(self):
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class WindowDeltas:
    stopped: float = 0.0
    distance: float = 0.0
    bin5: float = 0.0
    passes: int = 0
    serious: int = 0
    vehicle_collisions: int = 0

    @classmethod
    def between(cls, before, after):
        """Deltas of two MetricsRecorder.totals() snapshots."""
        return cls(
            stopped=after["stopped"] - before["stopped"],
            distance=after["distance"] - before["distance"],
            bin5=after["bin_25_30"] - before["bin_25_30"],
            passes=after["passes"] - before["passes"],
            serious=after["serious"] - before["serious"],
            vehicle_collisions=after["vehicle_collisions"] - before["vehicle_collisions"],
        )

    def as_vector(self):
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class RewardBreakdown:
    stopped_term: float = 0.0
    distance_term: float = 0.0
    speed2530_term: float = 0.0
    pass_term: float = 0.0
    serious_term: float = 0.0
    collision_term: float = 0.0
    total: float = 0.0

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_reward(deltas, coefficients=None):
    c = coefficients or RewardCoefficients()
    terms = (
        c.stopped * deltas.stopped,
        c.distance * deltas.distance,
        c.speed2530 * deltas.bin5,
        c.pass_through * deltas.passes,
        c.serious * deltas.serious,
        c.collision * deltas.vehicle_collisions,
    )
    total = 0.0
    for t in terms:
        total += t
    return RewardBreakdown(*terms, total=total)


# ------------------------------------------------------------------ #
#  Observation / action
# ------------------------------------------------------------------ #

def observation_size(light_count, observed=OBSERVED_VEHICLES):
    return 2 * observed + 4 * light_count


def phase_code(controller):
    if controller.phase is Phase.GREEN_A:
        return 0
    if controller.phase is Phase.GREEN_B:
        return 2
    return 1


def observe(world, rng, observed=OBSERVED_VEHICLES):
    """Flat observation: sampled vehicle positions then (x, z, phase, green) per light."""
    center = np.asarray(world.network.center, dtype=float)
    half = float(world.network.half_extent)
    out = np.zeros(observation_size(len(world.signals), observed))

    ids = world.fleet.active_ids()
    if len(ids):
        picked = np.sort(rng.choice(ids, size=min(observed, len(ids)), replace=False))
        xy = (world.fleet.positions()[picked] - center) / half
        out[: 2 * len(picked)] = xy.reshape(-1)

    base = 2 * observed
    for k, c in enumerate(world.signals):
        green = 0.5 * (c.green_a + c.green_b)
        out[base + 4 * k: base + 4 * k + 4] = (
            (c.position[0] - center[0]) / half,
            (c.position[1] - center[1]) / half,
            phase_code(c) / 2.0,
            (green - MIN_GREEN) / (MAX_GREEN - MIN_GREEN),
        )
    return np.clip(out, -1.0, 1.0)


def decode_action(action, light_count):
    """Per-light green seconds and the global speed limit from an action in [-1, 1]."""
    a = np.clip(np.asarray(action, dtype=float).reshape(-1), -1.0, 1.0)
    if len(a) != light_count + 1:
        raise InvalidParameter(f"action has {len(a)} components, expected {light_count + 1}")
    greens = MIN_GREEN + (a[:-1] + 1.0) / 2.0 * (MAX_GREEN - MIN_GREEN)
    lo, hi = SPEED_LIMIT_RANGE
    limit = lo + (a[-1] + 1.0) / 2.0 * (hi - lo)
    return np.clip(greens, MIN_GREEN, MAX_GREEN), float(np.clip(limit, lo, hi))


def apply_action(world, action):
    greens, limit = decode_action(action, len(world.signals))
    for controller, g in zip(world.signals, greens):
        set_green_duration(controller, "A", float(g))
        set_green_duration(controller, "B", float(g))
    world.set_speed_limit(limit)
    return {"greens": greens, "speed_limit": limit}


# ================================================================== #
#  Environment
# ================================================================== #

class TrafficSignalEnv(gym.Env):
    """One decision per `decision_interval` simulated seconds, 10 per episode by default."""

    metadata = {"render_modes": []}

    def __init__(self, scenario, network=None, hash_every=None):
        super().__init__()
        self.scenario = scenario
        self.episode = scenario.episode
        self.coefficients = scenario.rewards
        self.network = network or generate_city(scenario.city)
        self.hash_every = hash_every
        n = self.network.light_count
        if scenario.expected_lights is not None and n != scenario.expected_lights:
            LOG.warning("scenario %s expects %d lights, network has %d",
                        scenario.name, scenario.expected_lights, n)
        self.observation_space = spaces.Box(
            -1.0, 1.0, shape=(observation_size(n, self.episode.observed_vehicles),), dtype=np.float32
        )
        self.action_space = spaces.Box(-1.0, 1.0, shape=(n + 1,), dtype=np.float32)
        self.world = None
        self.decisions = 0
        self.seed_value = scenario.seed

    @property
    def done(self):
        return self.world is not None and self.decisions >= self.episode.decisions

    def _draw_reset(self, world_seed):
        rng = derive_generator(world_seed, EPISODE_RESET)
        n = self.network.light_count
        if self.scenario.fixed_green is not None:
            greens = np.full(n, float(self.scenario.fixed_green))
        else:
            greens = rng.uniform(*self.episode.green_range, size=n)
        if self.scenario.fixed_speed_limit is not None:
            limit = float(self.scenario.fixed_speed_limit)
        else:
            limit = float(rng.uniform(*self.episode.speed_limit_range))
        return greens, limit

    def reset(self, *, seed=None, options=None):
        super().reset(seed=seed)
        if seed is not None:
            self.seed_value = int(seed)
        greens, limit = self._draw_reset(self.seed_value)
        s = self.scenario
        self.world = World(self.network, s.spawn, self.seed_value, s.rays, s.fuel,
                           speed_limit=limit, green=greens)
        spawn_due(self.world)
        self.decisions = 0
        self.world.metrics.timeline_row(0.0)
        obs = self._observe()
        info = {"greens": greens, "speed_limit": limit, "vehicles": self.world.fleet.size}
        return obs, info

    def _observe(self):
        rng = self.world.streams[OBSERVATION_SAMPLING]
        return observe(self.world, rng, self.episode.observed_vehicles).astype(np.float32)

    def step(self, action):
        if self.world is None:
            raise EpisodeFinished("reset() must be called before step()")
        if self.done:
            raise EpisodeFinished(f"episode finished after {self.decisions} decisions")
        if action is not None:
            apply_action(self.world, action)

        before = self.world.metrics.totals()
        self.world.run(self.episode.decision_interval, self.hash_every)
        deltas = WindowDeltas.between(before, self.world.metrics.totals())
        breakdown = compute_reward(deltas, self.coefficients)
        self.decisions += 1
        self.world.metrics.timeline_row(self.world.sim_time)

        terminated = self.done
        if terminated:
            g = self.world.metrics.global_metrics()
            LOG.info("episode end t=%.1f spawned=%d removed=%d serious=%d vv=%d vnv=%d",
                     self.world.sim_time, g.spawned_vehicles, g.removed_vehicles,
                     g.serious_collisions, g.vv_collisions, g.vnv_collisions)
        info = {"reward": breakdown, "deltas": deltas, "sim_time": self.world.sim_time,
                "decision": self.decisions}
        return self._observe(), float(breakdown.total), terminated, False, info
