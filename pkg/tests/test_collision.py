import numpy as np
import pytest

from trafficlab.collision import (
    REMOVE_AFTER,
    CollisionKind,
    CollisionSeverityState,
    Contact,
    ImpactType,
    classify_impact,
    detect_contacts,
    resolve_impulse,
    severity_tick,
)
from trafficlab.geometry import rect_corners


def test_far_apart_no_contact(make_rects):
    assert detect_contacts(make_rects([[0.0, 0.0], [10.0, 0.0]])) == []


def test_coincident_footprints(make_rects):
    contacts = detect_contacts(make_rects([[3.0, 4.0], [3.0, 4.0]]))
    assert len(contacts) == 1
    c = contacts[0]
    assert (c.a_id, c.b_id) == (0, 1)
    assert c.penetration == pytest.approx(1.9)
    assert not c.b_is_obstacle


def test_vehicle_obstacle_contact(make_rects):
    vehicles = make_rects([[0.0, 0.0]], ids=[5])
    wall = make_rects([[0.0, 3.0]], half_extents=(10.0, 1.0), yaws=[90.0], ids=[2])
    contacts = detect_contacts(vehicles, wall, np.array([[0.0, 4.0]]))
    assert len(contacts) == 1
    c = contacts[0]
    assert (c.a_id, c.b_id, c.b_is_obstacle) == (5, 2, True)
    assert c.normal == pytest.approx((0.0, 1.0))
    assert c.penetration == pytest.approx(0.25)
    assert c.relative_speed_along_normal == pytest.approx(-4.0)


def _segments_cross(p, p2, q, q2):
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    d1, d2 = cross(q, q2, p), cross(q, q2, p2)
    d3, d4 = cross(p, p2, q), cross(p, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _inside(point, corners):
    signs = []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        signs.append((b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0]))
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def _brute_overlap(ca, cb):
    if any(_inside(p, cb) for p in ca) or any(_inside(p, ca) for p in cb):
        return True
    return any(_segments_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])
               for i in range(4) for j in range(4))


def test_detection_matches_polygon_oracle(make_rects):
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = 12
        rects = make_rects(rng.uniform(0, 15, size=(n, 2)), yaws=rng.uniform(0, 360, size=n))
        corners = rect_corners(rects.centers, rects.half_extents, rects.yaws)
        want = {(i, j) for i in range(n) for j in range(i + 1, n) if _brute_overlap(corners[i], corners[j])}
        got = {(c.a_id, c.b_id) for c in detect_contacts(rects)}
        assert got == want


# ------------------------------------------------------------------ #
#  Impulses
# ------------------------------------------------------------------ #

def test_head_on_equal_masses_rebound():
    v = 10.0
    velocities = np.array([[0.0, v], [0.0, -v]])
    contact = Contact(0, 1, (0.0, 1.0), 0.0, -2.0 * v)
    resolve_impulse(contact, velocities, inv_masses=np.array([1 / 4000.0, 1 / 4000.0]))
    assert velocities[0] == pytest.approx([0.0, -0.1 * v])
    assert velocities[1] == pytest.approx([0.0, 0.1 * v])


def test_wall_is_immovable():
    v = 8.0
    velocities = np.array([[0.0, v]])
    contact = Contact(0, 3, (0.0, 1.0), 0.0, -v, b_is_obstacle=True)
    resolve_impulse(contact, velocities)
    assert velocities[0] == pytest.approx([0.0, -0.1 * v])


def test_separating_pair_untouched():
    velocities = np.array([[0.0, -1.0], [0.0, 1.0]])
    before = velocities.copy()
    resolve_impulse(Contact(0, 1, (0.0, 1.0), 0.0, 2.0), velocities)
    np.testing.assert_array_equal(velocities, before)


def test_positional_correction_separates():
    velocities = np.zeros((2, 2))
    positions = np.array([[0.0, 0.0], [0.0, 1.0]])
    resolve_impulse(Contact(0, 1, (0.0, 1.0), 0.5, 0.0), velocities, positions)
    assert positions[1, 1] - positions[0, 1] == pytest.approx(1.0 + 0.8 * 0.5)


@pytest.mark.parametrize("yaw_b,normal,expected", [
    (180.0, (0.0, 1.0), ImpactType.HEAD_ON),
    (90.0, (0.0, 1.0), ImpactType.T_BONE),
    (0.0, (0.0, 1.0), ImpactType.REAR_END),
    (5.0, (1.0, 0.0), ImpactType.SIDESWIPE),
])
def test_impact_types(yaw_b, normal, expected):
    assert classify_impact(0.0, yaw_b, np.array(normal)) is expected


# ------------------------------------------------------------------ #
#  Severity
# ------------------------------------------------------------------ #

def _stopped_for(seconds, kind=CollisionKind.VEHICLE_VEHICLE):
    state = CollisionSeverityState()
    serious = removed = 0
    for _ in range(seconds):
        update = severity_tick(state, 1.0, True, kind, 0.0)
        state = update.state
        serious += update.became_serious
        removed += update.removed
    return state, serious, removed


def test_ten_seconds_disables_side_rays_only():
    state, serious, _ = _stopped_for(10)
    assert state.side_rays_disabled
    assert not state.serious
    assert serious == 0
    assert state.vv_count == 1


def test_thirty_one_seconds_is_serious():
    state, serious, removed = _stopped_for(31)
    assert state.serious
    assert serious == 1
    assert removed == 0


def test_sixty_one_seconds_removes():
    state, serious, removed = _stopped_for(61, CollisionKind.VEHICLE_NON_VEHICLE)
    assert state.removed
    assert removed == 1
    assert serious == 1
    assert state.vnv_count == 1
    assert severity_tick(state, 1.0, True, None, 0.0).state is state


def test_moving_vehicle_does_not_accumulate():
    state = CollisionSeverityState()
    for _ in range(int(REMOVE_AFTER) + 5):
        state = severity_tick(state, 1.0, True, CollisionKind.VEHICLE_VEHICLE, 3.0).state
    assert state.stopped_during_collision == 0.0
    assert not state.serious
    assert state.episode_duration == pytest.approx(REMOVE_AFTER + 5)


def test_separation_closes_episode():
    state, _, _ = _stopped_for(12)
    update = severity_tick(state, 1.0, False)
    assert update.exited
    assert not update.state.in_collision
    assert not update.state.side_rays_disabled
    assert update.state.vv_count == 1

    again = severity_tick(update.state, 1.0, True, CollisionKind.VEHICLE_VEHICLE, 0.0)
    assert again.entered
    assert again.state.vv_count == 2


def test_kind_is_fixed_when_contact_starts():
    state = severity_tick(CollisionSeverityState(), 1.0, True, CollisionKind.VEHICLE_NON_VEHICLE, 0.0).state
    update = severity_tick(state, 1.0, True, CollisionKind.VEHICLE_VEHICLE, 0.0)
    assert not update.entered
    assert update.state.kind is CollisionKind.VEHICLE_NON_VEHICLE
    assert (update.state.vv_count, update.state.vnv_count) == (0, 1)
