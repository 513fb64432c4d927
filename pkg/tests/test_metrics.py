import numpy as np
import pandas as pd
import pytest

from trafficlab.errors import MetricsWriteError, ZeroDistance
from trafficlab.metrics import (
    BIN_LABELS,
    VEHICLE_COLUMNS,
    FuelModel,
    MetricsRecorder,
    VehicleMetrics,
    bin_speed,
    bin_speeds,
    capture_schedule,
    estimate_fuel_co2,
    write_collision_log,
    write_metrics_csv,
)


@pytest.mark.parametrize("speed,expected", [(0.0, 0), (4.999, 0), (5.0, 1), (12.0, 2), (29.9, 5), (35.0, 6), (50.0, 6)])
def test_speed_bins(speed, expected):
    assert bin_speed(speed) == expected
    assert bin_speeds([speed])[0] == expected


def _recorder_with(speeds, seconds, dt=1.0):
    rec = MetricsRecorder()
    for i in range(len(speeds)):
        rec.on_spawn(i, 0.0)
    ids = np.arange(len(speeds))
    for _ in range(int(seconds / dt)):
        rec.record(ids, np.asarray(speeds, dtype=float), dt)
    return rec


def test_stopped_whole_episode():
    v = _recorder_with([0.0], 600).vehicle(0)
    assert v.stopped_total == 600.0
    assert v.stopped_longest == 600.0
    assert v.bins[0] == 600.0
    assert v.distance_total == 0.0


def test_constant_speed():
    v = _recorder_with([10.0], 600).vehicle(0)
    assert v.distance_total == pytest.approx(6000.0)
    assert v.bins[2] == 600.0
    assert v.stopped_total == 0.0


def test_bins_sum_to_alive_time():
    rng = np.random.default_rng(1)
    rec = MetricsRecorder()
    for i in range(20):
        rec.on_spawn(i, 0.0)
    ids = np.arange(20)
    for _ in range(500):
        rec.record(ids, rng.uniform(0, 40, size=20), 0.02)
    assert rec.bins[:20].sum() == pytest.approx(rec.alive_time[:20].sum())


def test_streak_resets_on_moving():
    rec = MetricsRecorder()
    rec.on_spawn(0, 0.0)
    for speed in (0, 0, 0, 5, 0):
        rec.record(np.array([0]), np.array([float(speed)]), 1.0)
    v = rec.vehicle(0)
    assert (v.stopped_total, v.stopped_current_streak, v.stopped_longest) == (4.0, 1.0, 3.0)


def test_vehicle_ids_are_dense():
    rec = MetricsRecorder()
    rec.on_spawn(0, 0.0)
    with pytest.raises(ValueError):
        rec.on_spawn(2, 0.0)


def test_global_counts_conserve_vehicles():
    rec = _recorder_with([1.0, 2.0, 3.0], 10)
    rec.on_removed(1, 5.0)
    rec.on_collision(0, True)
    rec.on_collision(2, False)
    rec.on_serious(0)
    g = rec.global_metrics()
    assert g.spawned_vehicles == g.active_vehicles + g.removed_vehicles == 3
    assert (g.vv_collisions, g.vnv_collisions, g.serious_collisions, g.total_collisions) == (1, 1, 1, 2)


# ------------------------------------------------------------------ #
#  Fuel
# ------------------------------------------------------------------ #

def test_one_mile_without_idling():
    out = estimate_fuel_co2(VehicleMetrics(distance_total=1609.34, stopped_total=0.0))
    assert out["fuel_gal_per_mile"] == pytest.approx(0.04)
    assert out["co2_g_per_mile"] == pytest.approx(0.04 * 8887.0)


def test_zero_distance_reports_absolute_fuel():
    with pytest.raises(ZeroDistance) as err:
        estimate_fuel_co2(VehicleMetrics(distance_total=0.0, stopped_total=3600.0))
    assert err.value.fuel_gallons == pytest.approx(0.3)


def test_idling_raises_fuel_per_mile():
    a = estimate_fuel_co2(VehicleMetrics(distance_total=3000.0, stopped_total=100.0))
    b = estimate_fuel_co2(VehicleMetrics(distance_total=3000.0, stopped_total=200.0))
    assert b["fuel_gal_per_mile"] > a["fuel_gal_per_mile"]


def test_fuel_arrays_are_nan_when_parked():
    _, _, gpm, _ = FuelModel().arrays(np.array([0.0, 100.0]), np.array([5.0, 5.0]))
    assert np.isnan(gpm[0]) and gpm[1] > 0


# ------------------------------------------------------------------ #
#  Files
# ------------------------------------------------------------------ #

def test_capture_schedule():
    assert capture_schedule(600.0) == [600.0]
    assert capture_schedule(600.0, 120.0) == [120.0, 240.0, 360.0, 480.0, 600.0]
    assert capture_schedule(600.0, 250.0) == [250.0, 500.0, 600.0]


def test_two_vehicles_one_capture(tmp_path):
    rec = _recorder_with([0.0, 10.0], 60)
    path = write_metrics_csv([rec.capture(60.0)], tmp_path / "vehicles.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",") == VEHICLE_COLUMNS
    frame = pd.read_csv(path)
    assert frame["vehicle_id"].tolist() == [0, 1]
    assert frame[list(BIN_LABELS)].sum(axis=1).tolist() == [60.0, 60.0]
    assert "600.000000" in lines[2]


def test_rewrite_is_byte_identical(tmp_path):
    a = write_metrics_csv([_recorder_with([3.3, 7.1], 20).capture(20.0)], tmp_path / "a.csv")
    b = write_metrics_csv([_recorder_with([3.3, 7.1], 20).capture(20.0)], tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(MetricsWriteError) as err:
        write_collision_log([], blocker / "collisions.csv")
    assert "collisions.csv" in str(err.value)
