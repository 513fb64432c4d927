import logging
import time

import numpy as np
import pytest

from config import Config
from trafficlab.engine import SimClock, World, spatial_query, spawn_due, tick, world_hash
from trafficlab.network import generate_city
from trafficlab.presets import load_scenario
from trafficlab.spatial import linear_scan_disc
from trafficlab.spawning import SpawnConfig


def _world(desk_network, desk_scenario, seed=0, **kw):
    return World(desk_network, desk_scenario.spawn, seed, desk_scenario.rays, desk_scenario.fuel, **kw)


def test_clock_counts_ticks():
    clock = SimClock()
    assert clock.ticks_for(60.0) == 3000
    for _ in range(150):
        clock.advance()
    assert clock.sim_time == pytest.approx(3.0)


def test_first_cycle_spawns_at_time_zero(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario)
    spawn_due(world)
    assert world.next_cycle == 1
    assert 0 < world.fleet.size <= desk_scenario.spawn.max_vehicles
    assert world.metrics.size == world.fleet.size


def test_spawn_cap_holds(desk_network, desk_scenario):
    world = World(desk_network, SpawnConfig(cycles=50, cycle_interval=0.1, max_vehicles=20), 0)
    world.run(6.0)
    assert 0 < world.fleet.size <= 20


def test_vehicles_move(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario)
    world.run(3.0)
    assert world.clock.tick_index == 150
    assert world.metrics.distance[: world.metrics.size].sum() > 0.0
    assert all(c.phase_elapsed > 0.0 for c in world.signals)


def test_conservation(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario)
    world.run(10.0)
    g = world.metrics.global_metrics()
    assert g.spawned_vehicles == g.active_vehicles + g.removed_vehicles
    assert g.active_vehicles == len(world.fleet.active_ids())


def test_same_seed_same_hash(desk_network, desk_scenario):
    a = _world(desk_network, desk_scenario, seed=4).run(5.0)
    b = _world(desk_network, desk_scenario, seed=4).run(5.0)
    assert world_hash(a) == world_hash(b)
    np.testing.assert_array_equal(a.fleet.positions(), b.fleet.positions())


def test_different_seed_diverges(desk_network, desk_scenario):
    a = _world(desk_network, desk_scenario, seed=1).run(5.0)
    b = _world(desk_network, desk_scenario, seed=2).run(5.0)
    assert world_hash(a) != world_hash(b)


def test_hash_is_logged(desk_network, desk_scenario, caplog):
    world = _world(desk_network, desk_scenario)
    with caplog.at_level(logging.DEBUG, logger="trafficlab.engine"):
        world.run(1.0, hash_every=10)
    hashes = [r.getMessage() for r in caplog.records if " hash " in r.getMessage()]
    assert len(hashes) == 5
    assert hashes[-1].endswith(world_hash(world))


def test_speed_limit_applies_to_everyone(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario)
    spawn_due(world)
    world.set_speed_limit(22.5)
    assert (world.fleet.view("speed_limit") == 22.5).all()


def test_spatial_query_matches_scan(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario).run(2.0)
    rects = world.vehicle_rects()
    for p in rects.centers[:10]:
        hits = spatial_query(world, p, 15.0)
        np.testing.assert_array_equal(hits.vehicles, linear_scan_disc(rects, p, 15.0))
        np.testing.assert_array_equal(hits.obstacles, linear_scan_disc(world.obstacles, p, 15.0))


def test_collision_rows_are_well_formed(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario).run(20.0)
    rows = world.collision_rows()
    assert [r["time"] for r in rows] == sorted(r["time"] for r in rows)
    for r in rows:
        assert r["kind"] in ("vehicle_vehicle", "vehicle_non_vehicle")
        assert r["episode_duration"] >= 0.0


def test_tick_returns_world(desk_network, desk_scenario):
    world = _world(desk_network, desk_scenario)
    assert tick(world) is world
    assert world.sim_time == pytest.approx(0.02)


# ------------------------------------------------------------------ #
#  Acceptance
# ------------------------------------------------------------------ #

@pytest.mark.slow
def test_main_preset_spawn_band():
    scenario = load_scenario("main")
    world = World(generate_city(scenario.city), scenario.spawn, scenario.seed, scenario.rays, scenario.fuel)
    world.run(scenario.spawn.cycle_time(scenario.spawn.cycles) + 1.0)
    assert 850 <= world.fleet.size <= 900


@pytest.mark.slow
def test_main_preset_throughput():
    scenario = load_scenario("main")
    world = World(generate_city(scenario.city), scenario.spawn, scenario.seed, scenario.rays, scenario.fuel)
    started = time.perf_counter()
    world.run(60.0)
    assert 60.0 / (time.perf_counter() - started) >= Config.THROUGHPUT_TARGET
