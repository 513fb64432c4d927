import pytest

from trafficlab.errors import OutOfRange
from trafficlab.network import SignalSite, StopLine
from trafficlab.signals import (
    Approach,
    Light,
    Phase,
    SignalController,
    gate_vehicles,
    set_green_duration,
    tick_signal,
)


def _controller(green=30.0):
    site = SignalSite(0, (0.0, 0.0), "X", [
        StopLine(10, (0.0, 0.0), (0.0, 1.0), "B"),
        StopLine(11, (0.0, 0.0), (1.0, 0.0), "A"),
    ])
    return SignalController.from_site(site, green)


def _run(controller, seconds, dt=0.02):
    for _ in range(int(round(seconds / dt))):
        tick_signal(controller, dt)
    return controller


# ------------------------------------------------------------------ #
#  Phase machine
# ------------------------------------------------------------------ #

def test_cycle_length_with_short_greens():
    assert _controller(5.0).cycle_length() == pytest.approx(18.0)


def test_yellow_and_all_red_follow_green():
    c = _controller(5.0)
    assert tick_signal(c, 7.9).phase is Phase.YELLOW_A
    c = _controller(5.0)
    assert tick_signal(c, 8.5).phase is Phase.ALL_RED_A
    assert c.light("A") is Light.RED
    assert c.light("B") is Light.RED


def test_full_cycle_returns_to_green_a():
    c = _controller(5.0)
    tick_signal(c, 18.0)
    assert c.phase is Phase.GREEN_A
    assert c.phase_elapsed == 0.0
    assert sum(c.time_in_phase) == pytest.approx(18.0)


def test_small_steps_match_one_big_step():
    a = _run(_controller(7.0), 30.0)
    b = tick_signal(_controller(7.0), 30.0)
    assert a.phase is b.phase
    assert a.phase_elapsed == pytest.approx(b.phase_elapsed, abs=1e-6)


def test_perpendicular_pair_gets_green_after_all_red():
    c = tick_signal(_controller(5.0), 9.5)
    assert c.phase is Phase.GREEN_B
    assert c.light("B") is Light.GREEN
    assert c.light("A") is Light.RED


def test_new_green_applies_at_next_onset():
    c = _controller(30.0)
    tick_signal(c, 1.0)
    set_green_duration(c, "A", 10.0)
    assert c.phase_duration() == 30.0
    tick_signal(c, 28.9)
    assert c.phase is Phase.GREEN_A
    tick_signal(c, 0.2)
    assert c.phase is Phase.YELLOW_A

    tick_signal(c, 3.9 + 1.0 + 30.0 + 3.0 + 1.0)
    assert c.phase is Phase.GREEN_A
    assert c.phase_duration() == 10.0


def test_green_bounds():
    c = _controller()
    set_green_duration(c, "B", 5.0)
    set_green_duration(c, "A", 60.0)
    assert (c.green_a, c.green_b) == (60.0, 5.0)
    with pytest.raises(OutOfRange):
        set_green_duration(c, "A", 61.0)
    with pytest.raises(OutOfRange):
        set_green_duration(c, "B", 4.99)
    with pytest.raises(OutOfRange):
        set_green_duration(c, "C", 30.0)


def test_restart_clears_logs():
    c = tick_signal(_controller(), 40.0)
    c.pass_through_count = 3
    c.restart(12.0, 20.0)
    assert c.phase is Phase.GREEN_A
    assert (c.green_a, c.green_b, c.active_green) == (12.0, 20.0, 12.0)
    assert c.pass_through_count == 0
    assert c.to_row()["green_a"] == 0.0


# ------------------------------------------------------------------ #
#  Gating
# ------------------------------------------------------------------ #

def test_green_approach_is_not_gated():
    c = _controller()
    result = gate_vehicles(c, [Approach(1, 11, (-5.0, 0.0), 6.0)])
    assert result.directives == {}


def test_red_at_the_line_is_full_brake():
    c = _controller()
    result = gate_vehicles(c, [Approach(1, 10, (0.0, 0.0), 0.0)])
    assert result.directives == {1: pytest.approx(6000.0)}


def test_red_ramp_and_range():
    c = _controller()
    result = gate_vehicles(c, [Approach(1, 10, (0.0, -6.0), 7.0), Approach(2, 10, (0.0, -20.0), 21.0)])
    assert result.directives == {1: pytest.approx(3000.0)}


def test_yellow_close_to_the_line_goes_through():
    c = tick_signal(_controller(5.0), 6.0)
    assert c.light("A") is Light.YELLOW
    result = gate_vehicles(c, [Approach(1, 11, (-4.0, 0.0), 5.0), Approach(2, 11, (-9.0, 0.0), 10.0)])
    assert set(result.directives) == {2}


def test_crossing_on_green_counts():
    c = _controller()
    result = gate_vehicles(c, [Approach(1, 11, (0.5, 0.0), 1.0)])
    assert result.crossed == [1]
    assert result.passes == 1
    assert c.pass_through_count == 1
    assert c.to_row()["pass_through_count"] == 1


def test_crossing_on_red_is_not_a_pass():
    c = _controller()
    result = gate_vehicles(c, [Approach(1, 10, (0.0, 0.5), 1.0)])
    assert result.crossed == [1]
    assert c.pass_through_count == 0
