import numpy as np
import pytest

from trafficlab.geometry import heading_of, ray_rect_distances, rect_corners, relative_angle
from trafficlab.rng import PATHS, SPAWNING, RngStreams, derive_generator
from trafficlab.spatial import UniformGrid, linear_scan_disc


@pytest.mark.parametrize("dx,dz,expected", [(0, 1, 0.0), (1, 0, 90.0), (0, -1, 180.0), (-1, 0, 270.0)])
def test_heading_is_clockwise_from_z(dx, dz, expected):
    assert heading_of(dx, dz) == pytest.approx(expected)


def test_relative_angle_wraps():
    assert relative_angle(10.0, 350.0) == pytest.approx(20.0)
    assert relative_angle(350.0, 10.0) == pytest.approx(340.0)


def test_corners_of_axis_aligned_rect():
    corners = rect_corners(np.array([[0.0, 0.0]]), np.array([[2.0, 1.0]]), np.array([0.0]))[0]
    assert sorted(map(tuple, np.round(corners, 9))) == [(-1.0, -2.0), (-1.0, 2.0), (1.0, -2.0), (1.0, 2.0)]


def test_ray_entry_distance():
    d = ray_rect_distances(
        origins=np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 5.0]]),
        directions=np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
        max_lengths=np.array([10.0, 10.0, 10.0]),
        centers=np.array([[0.0, 5.0]] * 3),
        half_extents=np.array([[1.0, 1.0]] * 3),
        yaws=np.zeros(3),
    )
    assert d[0] == pytest.approx(4.0)
    assert np.isinf(d[1])
    assert d[2] == 0.0


def test_ray_beyond_range_misses():
    d = ray_rect_distances(np.array([[0.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([3.0]),
                           np.array([[0.0, 5.0]]), np.array([[1.0, 1.0]]), np.zeros(1))
    assert np.isinf(d[0])


# ------------------------------------------------------------------ #
#  Spatial index
# ------------------------------------------------------------------ #

def _random_rects(rng, n, make_rects):
    return make_rects(rng.uniform(-200, 200, size=(n, 2)), yaws=rng.uniform(0, 360, size=n))


def test_disc_query_matches_linear_scan(make_rects):
    rng = np.random.default_rng(3)
    rects = _random_rects(rng, 400, make_rects)
    grid = UniformGrid(cell_size=20.0).build(rects)
    for _ in range(200):
        p = rng.uniform(-220, 220, size=2)
        r = float(rng.uniform(0.5, 40))
        np.testing.assert_array_equal(grid.query_disc(p, r), linear_scan_disc(rects, p, r))


def test_query_on_empty_grid(make_rects):
    grid = UniformGrid().build(make_rects(np.zeros((0, 2))))
    assert len(grid.query_disc((0.0, 0.0), 10.0)) == 0
    assert len(grid.self_pairs()[0]) == 0


def test_self_pairs_cover_every_close_pair(make_rects):
    rng = np.random.default_rng(11)
    rects = _random_rects(rng, 300, make_rects)
    i, j = UniformGrid(cell_size=15.0).build(rects).self_pairs()
    got = set(zip(i.tolist(), j.tolist()))

    radii = rects.radii
    want = set()
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            if np.hypot(*(rects.centers[a] - rects.centers[b])) <= radii[a] + radii[b]:
                want.add((a, b))
    assert got == want


# ------------------------------------------------------------------ #
#  RNG streams
# ------------------------------------------------------------------ #

def test_streams_are_independent():
    a = RngStreams(42)
    b = RngStreams(42)
    a[SPAWNING].random(1000)
    assert a[PATHS].integers(0, 1 << 30, size=5).tolist() == b[PATHS].integers(0, 1 << 30, size=5).tolist()


def test_stream_seed_and_name_both_matter():
    x = derive_generator(1, SPAWNING).random()
    assert x == derive_generator(1, SPAWNING).random()
    assert x != derive_generator(2, SPAWNING).random()
    assert x != derive_generator(1, PATHS).random()


def test_derived_int_is_stable():
    assert RngStreams(5).derive_int("policy") == RngStreams(5).derive_int("policy")
    assert 0 <= RngStreams(5).derive_int("policy") < 2**63
