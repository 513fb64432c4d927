import numpy as np
import pytest

from trafficlab.errors import CoincidentWaypoints, InvalidLayout, InvalidLayoutIndex, InvalidParameter
from trafficlab.network import (
    CityGenConfig,
    PathContainer,
    Scale,
    Waypoint,
    accepts_link,
    infer_next_ways,
    block_layout,
    dumps_network,
    generate_city,
    load_network,
    loads_network,
    save_network,
    validate_network,
)
from trafficlab.presets import load_scenario


# ------------------------------------------------------------------ #
#  Orientation
# ------------------------------------------------------------------ #

def test_heading_along_z_is_zero(make_container):
    c = make_container(0, [(0, 0), (0, 10)])
    assert c.waypoints[0].heading == 0.0


def test_heading_along_x_is_ninety(make_container):
    c = make_container(0, [(0, 0), (10, 0)])
    assert c.waypoints[0].heading == pytest.approx(90.0)


def test_collinear_waypoints_share_heading(make_container):
    c = make_container(3, [(0, 0), (5, 5), (10, 10)])
    assert {round(w.heading, 9) for w in c.waypoints} == {45.0}
    assert all(w.container_id == 3 for w in c.waypoints)


def test_coincident_waypoints_raise(make_container):
    with pytest.raises(CoincidentWaypoints) as err:
        make_container(7, [(0, 0), (0, 10), (0, 10)])
    assert err.value.container_id == 7
    assert err.value.index == 1


def test_single_waypoint_is_invalid(make_container):
    with pytest.raises(InvalidLayout):
        make_container(0, [(0, 0)])


# ------------------------------------------------------------------ #
#  Links
# ------------------------------------------------------------------ #

@pytest.mark.parametrize("distance,heading,expected", [
    (5.0, 0.0, False),
    (20.0, 45.0, True),
    (20.0, 180.0, False),
    (20.0, 350.0, True),
    (20.0, 270.0, False),
    (8.0, 0.0, True),
    (35.0, 80.0, True),
    (36.0, 0.0, False),
])
def test_link_window(distance, heading, expected):
    final = Waypoint((0.0, 0.0, 0.0), 0.0)
    first = Waypoint((0.0, 0.0, distance), heading)
    assert accepts_link(final, first) is expected


def test_inferred_links_match_pairwise_filter(make_container):
    rng = np.random.default_rng(7)
    mismatches = 0
    total_links = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        starts = rng.uniform(0.0, 120.0, size=(n, 2))
        angles = rng.uniform(0.0, 2 * np.pi, size=n)
        lengths = rng.uniform(4.0, 20.0, size=n)
        ends = starts + lengths[:, None] * np.column_stack([np.sin(angles), np.cos(angles)])
        containers = infer_next_ways([
            make_container(i, [tuple(starts[i]), tuple(ends[i])]) for i in range(n)
        ])
        for c in containers:
            expected = [o.id for o in containers if o.id != c.id and accepts_link(c.last, o.first)]
            mismatches += expected != c.next_ways
            total_links += len(expected)
    assert mismatches == 0
    assert total_links > 0


def test_next_ways_inferred_from_geometry(straight_network):
    a, b = straight_network.containers
    assert a.next_ways == [1]
    assert b.next_ways == []


def test_validate_flags_dead_end_and_bad_link(straight_network):
    report = validate_network(straight_network)
    assert report["ok"]
    assert report["dead_ends"] == [1]

    straight_network.containers[1].next_ways.append(0)
    report = validate_network(straight_network)
    assert not report["ok"]
    assert report["link_violations"] == [(1, 0)]


def test_validate_flags_stale_heading(straight_network):
    c = straight_network.containers[0]
    straight_network.containers[0] = PathContainer(
        c.id, [Waypoint(w.position, 90.0, c.id) for w in c.waypoints], c.next_ways)
    assert validate_network(straight_network)["heading_violations"] == [0]


# ------------------------------------------------------------------ #
#  City generation
# ------------------------------------------------------------------ #

def test_very_small_is_one_central_block():
    config = CityGenConfig(scale="VerySmall")
    assert config.dist_center == 150.0
    assert block_layout(config) == (0, [(0.0, 0.0)])


def test_small_layout_zero():
    index, centers = block_layout(CityGenConfig(scale=Scale.SMALL, block_layout_index=0))
    assert index == 0
    assert centers == [(0.0, 0.0), (0.0, 300.0)]


def test_layout_index_out_of_range():
    with pytest.raises(InvalidLayoutIndex):
        block_layout(CityGenConfig(scale="Small", block_layout_index=2))


def test_dist_center_must_match_scale():
    with pytest.raises(InvalidParameter):
        CityGenConfig(scale="Medium", dist_center=200.0)


def test_random_layout_is_seeded():
    picks = {block_layout(CityGenConfig(scale="Large", block_layout_index=None, seed=s))[0]
             for s in range(20)}
    assert picks <= {0, 1, 2, 3}
    again = {block_layout(CityGenConfig(scale="Large", block_layout_index=None, seed=s))[0]
             for s in range(20)}
    assert picks == again


def test_desk_network_validates(desk_network, desk_scenario):
    report = validate_network(desk_network)
    assert report["ok"], report
    assert desk_network.light_count == desk_scenario.expected_lights
    assert {s.kind for s in desk_network.signals} == {"T"}
    assert all(2 <= len(c.waypoints) <= 12 for c in desk_network.containers)
    for site in desk_network.signals:
        for line in site.stop_lines:
            assert desk_network.containers[line.container_id].dest_signal == site.id


def test_generation_is_deterministic(desk_scenario):
    assert dumps_network(generate_city(desk_scenario.city)) == dumps_network(generate_city(desk_scenario.city))


@pytest.mark.slow
def test_main_preset_network():
    scenario = load_scenario("main")
    network = generate_city(scenario.city)
    assert validate_network(network)["ok"]
    assert network.light_count == scenario.expected_lights
    assert 116 <= len(network.containers) <= 156


# ------------------------------------------------------------------ #
#  Serialization
# ------------------------------------------------------------------ #

def test_json_text_is_stable(desk_network):
    text = dumps_network(desk_network)
    assert dumps_network(loads_network(text)) == text


def test_save_and_load(desk_network, tmp_path):
    path = save_network(desk_network, tmp_path / "nets" / "desk.json")
    loaded = load_network(path)
    assert loaded.summary() == desk_network.summary()
    assert [c.next_ways for c in loaded.containers] == [c.next_ways for c in desk_network.containers]
