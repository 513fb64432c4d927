"""
Traffic Signals
Two-phase controllers for X and T intersections: green / 3 s yellow /
1 s all-red per approach pair, green durations in [5, 60] s that take
effect at the next green onset, stop-line gating and pass-through counts.
Pair A is the approaches travelling along x, pair B those along z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from trafficlab.errors import OutOfRange

YELLOW_DURATION = 3.0
ALL_RED_DURATION = 1.0
MIN_GREEN = 5.0
MAX_GREEN = 60.0
GATE_DISTANCE = 12.0
YELLOW_STOP_DISTANCE = 6.0
MAX_GATE_FACTOR = 6000.0
PHASE_EPS = 1e-9

PAIRS = ("A", "B")


class Phase(IntEnum):
    GREEN_A = 0
    YELLOW_A = 1
    ALL_RED_A = 2
    GREEN_B = 3
    YELLOW_B = 4
    ALL_RED_B = 5


class Light(IntEnum):
    RED = 0
    YELLOW = 1
    GREEN = 2


SIGNAL_LOG_COLUMNS = ["light_id", "kind", "green_a", "yellow_a", "all_red_a", "green_b",
                      "yellow_b", "all_red_b", "green_duration_a", "green_duration_b",
                      "pass_through_count"]


@dataclass
class SignalController:
    id: int
    intersection_kind: str = "X"
    position: tuple = (0.0, 0.0)
    green_a: float = 30.0
    green_b: float = 30.0
    yellow_duration: float = YELLOW_DURATION
    all_red_duration: float = ALL_RED_DURATION
    phase: Phase = Phase.GREEN_A
    phase_elapsed: float = 0.0
    active_green: float = 30.0
    stop_lines: dict = field(default_factory=dict)
    pass_through_count: int = 0
    time_in_phase: list = field(default_factory=lambda: [0.0] * 6)

    @classmethod
    def from_site(cls, site, green=30.0):
        _check_green(green)
        return cls(id=site.id, intersection_kind=site.kind, position=tuple(site.position),
                   green_a=green, green_b=green, active_green=green,
                   stop_lines={line.container_id: line for line in site.stop_lines})

    # ------------------------------------------------------------------ #
    #  Phase machine
    # ------------------------------------------------------------------ #

    def phase_duration(self, phase=None):
        phase = self.phase if phase is None else phase
        if phase in (Phase.GREEN_A, Phase.GREEN_B):
            return self.active_green
        if phase in (Phase.YELLOW_A, Phase.YELLOW_B):
            return self.yellow_duration
        return self.all_red_duration

    def restart(self, green_a, green_b=None):
        """Back to the start of GreenA with fresh durations and zeroed logs."""
        green_b = green_a if green_b is None else green_b
        _check_green(green_a)
        _check_green(green_b)
        self.green_a, self.green_b = float(green_a), float(green_b)
        self.phase, self.phase_elapsed = Phase.GREEN_A, 0.0
        self.active_green = self.green_a
        self.pass_through_count = 0
        self.time_in_phase = [0.0] * 6

    def light(self, pair):
        if pair == "A":
            return {Phase.GREEN_A: Light.GREEN, Phase.YELLOW_A: Light.YELLOW}.get(self.phase, Light.RED)
        return {Phase.GREEN_B: Light.GREEN, Phase.YELLOW_B: Light.YELLOW}.get(self.phase, Light.RED)

    def cycle_length(self):
        return self.green_a + self.green_b + 2.0 * (self.yellow_duration + self.all_red_duration)

    def to_row(self):
        return {
            "light_id": self.id,
            "kind": self.intersection_kind,
            "green_a": self.time_in_phase[Phase.GREEN_A],
            "yellow_a": self.time_in_phase[Phase.YELLOW_A],
            "all_red_a": self.time_in_phase[Phase.ALL_RED_A],
            "green_b": self.time_in_phase[Phase.GREEN_B],
            "yellow_b": self.time_in_phase[Phase.YELLOW_B],
            "all_red_b": self.time_in_phase[Phase.ALL_RED_B],
            "green_duration_a": self.green_a,
            "green_duration_b": self.green_b,
            "pass_through_count": self.pass_through_count,
        }


def _check_green(seconds):
    if not MIN_GREEN <= float(seconds) <= MAX_GREEN:
        raise OutOfRange(f"green duration {seconds} outside [{MIN_GREEN}, {MAX_GREEN}]")


def tick_signal(controller, dt):
    """Advance the phase machine by dt; leftover time carries into the next phase."""
    remaining = float(dt)
    while remaining > 0.0:
        left = controller.phase_duration() - controller.phase_elapsed
        if remaining < left - PHASE_EPS:
            controller.phase_elapsed += remaining
            controller.time_in_phase[controller.phase] += remaining
            break
        step = max(left, 0.0)
        controller.time_in_phase[controller.phase] += step
        remaining -= step
        controller.phase = Phase((controller.phase + 1) % 6)
        controller.phase_elapsed = 0.0
        if controller.phase is Phase.GREEN_A:
            controller.active_green = controller.green_a
        elif controller.phase is Phase.GREEN_B:
            controller.active_green = controller.green_b
        if remaining <= PHASE_EPS:
            break
    return controller


def set_green_duration(controller, approach_pair, seconds):
    """Schedule a green duration for a pair; applies from its next green onset."""
    _check_green(seconds)
    if approach_pair not in PAIRS:
        raise OutOfRange(f"unknown approach pair {approach_pair!r}")
    if approach_pair == "A":
        controller.green_a = float(seconds)
    else:
        controller.green_b = float(seconds)
    return controller


# ================================================================== #
#  Gating
# ================================================================== #

@dataclass(frozen=True)
class Approach:
    vehicle_id: int
    container_id: int
    front: tuple
    previous_distance: float


@dataclass
class GateResult:
    directives: dict = field(default_factory=dict)
    crossed: list = field(default_factory=list)
    passes: int = 0


def gate_factors(distance, light):
    """Brake factor for vehicles at `distance` before the line under `light` (arrays)."""
    d = np.asarray(distance, dtype=float)
    within = (d >= 0.0) & (d <= GATE_DISTANCE)
    stop = (light == Light.RED) | ((light == Light.YELLOW) & (d > YELLOW_STOP_DISTANCE))
    return np.where(within & stop, MAX_GATE_FACTOR * (1.0 - d / GATE_DISTANCE), 0.0)


def gate_vehicles(controller, vehicles):
    """Brake directives for approaching vehicles and pass-through counting.

    vehicles is an iterable of Approach whose container ends at this signal.
    A front that moves from before the line (d > 0) to on or past it counts
    as a pass-through when its pair shows green.
    """
    result = GateResult()
    for v in vehicles:
        line = controller.stop_lines[v.container_id]
        d = float(np.dot(np.asarray(line.position) - np.asarray(v.front), np.asarray(line.direction)))
        light = controller.light(line.pair)
        if v.previous_distance > 0.0 >= d:
            result.crossed.append(v.vehicle_id)
            if light is Light.GREEN:
                result.passes += 1
            continue
        factor = float(gate_factors(d, light))
        if factor > 0.0:
            result.directives[v.vehicle_id] = factor
    controller.pass_through_count += result.passes
    return result
