import math

import numpy as np
import pytest

from trafficlab.dynamics import (
    DT,
    Fleet,
    VehicleParams,
    VehicleState,
    advance_navigation,
    brake_torque,
    max_steer_for_wheelbase,
    motor_torque,
    step_vehicle,
    steering_angle,
)
from trafficlab.errors import DegenerateTarget, InvalidParameter


def _state(**kw):
    params = kw.pop("params", VehicleParams())
    return VehicleState(id=0, position=kw.pop("position", (0.0, 0.0, 0.0)), yaw=kw.pop("yaw", 0.0),
                        params=params, **kw)


# ------------------------------------------------------------------ #
#  Steering
# ------------------------------------------------------------------ #

def test_target_ahead_needs_no_steering():
    assert steering_angle(_state(), (0.0, 0.0, 10.0)) == 0.0


def test_target_to_the_right_gets_full_lock():
    params = VehicleParams(max_steer_angle=35.0)
    assert steering_angle(_state(params=params), (5.0, 0.0, 0.0)) == pytest.approx(35.0)


def test_diagonal_target():
    params = VehicleParams(max_steer_angle=40.0)
    assert steering_angle(_state(params=params), (1.0, 0.0, 1.0)) == pytest.approx(40.0 / math.sqrt(2.0))
    assert steering_angle(_state(params=params), (1.0, 0.0, 1.0)) == pytest.approx(28.284, abs=1e-3)


def test_target_in_local_frame():
    # facing +x, a target at +z is on the left
    params = VehicleParams(max_steer_angle=40.0)
    assert steering_angle(_state(yaw=90.0, params=params), (0.0, 0.0, 5.0)) == pytest.approx(-40.0)


def test_coincident_target_raises():
    with pytest.raises(DegenerateTarget):
        steering_angle(_state(position=(3.0, 0.0, 4.0)), (3.0, 0.0, 4.0))


def test_max_steer_follows_wheelbase():
    assert max_steer_for_wheelbase(2.8) == pytest.approx(49.0)
    assert max_steer_for_wheelbase(10.0) == 35.0
    assert max_steer_for_wheelbase(0.1) == 72.0


# ------------------------------------------------------------------ #
#  Torques
# ------------------------------------------------------------------ #

def test_motor_torque_falls_off_linearly():
    params = VehicleParams(car_power=120.0, speed_limit=30.0)
    assert motor_torque(0.0, params) == pytest.approx(3600.0)
    assert motor_torque(15.0, params) == pytest.approx(1800.0)
    assert motor_torque(30.0, params) == 0.0
    assert motor_torque(40.0, params) == 0.0


def test_motor_is_off_while_braking():
    assert motor_torque(0.0, VehicleParams(), brake_factor=1.0) == 0.0


def test_brake_torque():
    assert brake_torque(0.0, VehicleParams(brake_power=8.0)) == 0.0
    assert brake_torque(6000.0, VehicleParams(brake_power=8.0)) == pytest.approx(48000.0)
    assert brake_torque(3000.0, VehicleParams(brake_power=5.0)) == pytest.approx(15000.0)


@pytest.mark.parametrize("field,value", [
    ("car_power", 59.0), ("car_power", 201.0), ("brake_power", 11.0),
    ("speed_limit", 36.0), ("max_steer_angle", 80.0), ("suspension_spring", 5000.0),
])
def test_params_out_of_range(field, value):
    with pytest.raises(InvalidParameter):
        VehicleParams(**{field: value})


# ------------------------------------------------------------------ #
#  Integration
# ------------------------------------------------------------------ #

def test_force_free_motion():
    # at the speed limit the motor delivers nothing
    s = _state(speed=20.0, params=VehicleParams(speed_limit=20.0))
    out = step_vehicle(s, DT)
    assert out.speed == 20.0
    assert out.position[2] == pytest.approx(0.4)
    assert out.position[0] == pytest.approx(0.0, abs=1e-12)
    assert out.yaw == 0.0


def test_brakes_never_reverse():
    out = step_vehicle(_state(speed=0.0, brake_factor=6000.0))
    assert out.speed == 0.0
    assert out.stopped_timer == pytest.approx(DT)


def test_accelerates_from_rest():
    out = step_vehicle(_state())
    assert out.speed > 0.0


def test_step_is_deterministic():
    s = _state(speed=7.3, steer_angle=12.5, yaw=33.0)
    assert step_vehicle(s) == step_vehicle(s)


def test_dead_vehicle_does_not_move():
    s = _state(speed=5.0, alive=False)
    assert step_vehicle(s) is s


def test_fleet_matches_scalar_step():
    fleet = Fleet()
    params = VehicleParams(car_power=150.0, wheelbase=2.6)
    i = fleet.add(params, (4.0, 0.0, -2.0), 30.0, 0, 1, speed=12.0)
    fleet.steer[i] = 10.0
    fleet.brake[i] = 500.0
    before = fleet.state(i)
    for _ in range(50):
        fleet.integrate(np.array([i]))
    s = before
    for _ in range(50):
        s = step_vehicle(s)
    after = fleet.state(i)
    assert after.position == s.position
    assert after.yaw == s.yaw
    assert after.speed == s.speed


# ------------------------------------------------------------------ #
#  Navigation
# ------------------------------------------------------------------ #

@pytest.mark.parametrize("gap,advances", [(4.9, True), (5.1, False)])
def test_waypoint_reached_within_five(straight_network, gap, advances):
    s = _state(position=(0.0, 0.0, 40.0 - gap), path_id=0, waypoint_index=1)
    out = advance_navigation(s, straight_network, np.random.default_rng(0))
    if advances:
        assert (out.path_id, out.waypoint_index) == (1, 0)
    else:
        assert out is s


def test_single_next_way_is_taken(straight_network):
    s = _state(position=(0.0, 0.0, 39.0), path_id=0, waypoint_index=1)
    out = advance_navigation(s, straight_network, np.random.default_rng(123))
    assert out.path_id == 1
    assert out.steer_angle == pytest.approx(0.0, abs=1e-9)


def test_dead_end_respawns_at_container_start(straight_network):
    s = _state(position=(0.0, 0.0, 99.0), path_id=1, waypoint_index=1, speed=9.0)
    out = advance_navigation(s, straight_network, np.random.default_rng(0))
    assert out.path_id == 1
    assert out.waypoint_index == 1
    assert out.position == (0.0, 0.0, 60.0)
    assert out.speed == 0.0


def test_fleet_navigation_switches_and_respawns(straight_network):
    fleet = Fleet()
    fleet.add(VehicleParams(), (0.0, 0.0, 37.0), 0.0, 0, 1)
    fleet.add(VehicleParams(), (0.0, 0.0, 97.0), 0.0, 1, 1)
    switched, respawned = fleet.advance_navigation(np.array([0, 1]), straight_network.arrays,
                                                   np.random.default_rng(0))
    assert switched.tolist() == [0]
    assert respawned.tolist() == [1]
    assert fleet.path[0] == 1 and fleet.wp_index[0] == 0
    assert (fleet.x[1], fleet.z[1]) == (0.0, 60.0)


@pytest.mark.parametrize("steer", [10.0, 20.0, -35.0])
def test_constant_steer_traces_bicycle_radius(steer):
    # at the speed limit the motor is idle, so speed stays constant
    params = VehicleParams(speed_limit=20.0, wheelbase=2.8)
    s = _state(speed=20.0, steer_angle=steer, params=params)
    expected = params.wheelbase / math.tan(math.radians(abs(steer)))
    per_step = s.speed * DT / expected
    points = []
    for _ in range(round(2 * math.pi / per_step)):
        s = step_vehicle(s)
        points.append((s.position[0], s.position[2]))
    xy = np.array(points)

    # least-squares circle: x^2 + z^2 + D x + E z + F = 0
    design = np.column_stack([xy, np.ones(len(xy))])
    (d, e, f), *_ = np.linalg.lstsq(design, -(xy ** 2).sum(axis=1), rcond=None)
    radius = math.sqrt(d * d / 4 + e * e / 4 - f)
    assert radius == pytest.approx(expected, rel=0.01)
    assert math.hypot(*xy[-1]) < s.speed * DT
