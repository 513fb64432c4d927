"""
Collision
Separating-axis contact detection between vehicle footprints and static
obstacles, two-body normal impulses with positional correction, and the
per-vehicle enter / stay / exit severity state machine (7 s side-ray
disable, 30 s serious, 60 s removal).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from trafficlab.geometry import RectSet, rect_axes

RESTITUTION = 0.1
POSITION_CORRECTION = 0.8
STOPPED_SPEED = 0.1

SIDE_RAYS_DISABLE_AFTER = 7.0
SERIOUS_AFTER = 30.0
REMOVE_AFTER = 60.0

COLLISION_LOG_COLUMNS = ["time", "a_id", "b_id", "kind", "episode_duration",
                         "serious", "removed", "impact"]


class CollisionKind(str, Enum):
    VEHICLE_VEHICLE = "vehicle_vehicle"
    VEHICLE_NON_VEHICLE = "vehicle_non_vehicle"


class ImpactType(str, Enum):
    REAR_END = "rear_end"
    SIDESWIPE = "sideswipe"
    T_BONE = "t_bone"
    HEAD_ON = "head_on"
    FIXED_OBJECT = "fixed_object"


@dataclass(frozen=True)
class Contact:
    a_id: int
    b_id: int
    normal: tuple
    penetration: float
    relative_speed_along_normal: float
    b_is_obstacle: bool = False


@dataclass(frozen=True)
class CollisionSeverityState:
    in_collision: bool = False
    kind: CollisionKind | None = None
    stopped_during_collision: float = 0.0
    side_rays_disabled: bool = False
    serious: bool = False
    removed: bool = False
    episode_duration: float = 0.0
    vv_count: int = 0
    vnv_count: int = 0
    serious_count: int = 0


@dataclass(frozen=True)
class SeverityUpdate:
    state: CollisionSeverityState
    entered: bool = False
    became_serious: bool = False
    removed: bool = False
    exited: bool = False


# ================================================================== #
#  Detection
# ================================================================== #

def sat_overlap(a, b):
    """Pairwise SAT between two equally long RectSets.

    Returns (overlapping, normal (n, 2) pointing a -> b, penetration).
    """
    fa, ra = rect_axes(a.yaws)
    fb, rb = rect_axes(b.yaws)
    delta = b.centers - a.centers
    axes = np.stack([fa, ra, fb, rb], axis=1)

    def radius(axes_, fwd, rgt, half):
        return (half[:, 0:1] * np.abs(np.einsum("nkj,nj->nk", axes_, fwd))
                + half[:, 1:2] * np.abs(np.einsum("nkj,nj->nk", axes_, rgt)))

    span = radius(axes, fa, ra, a.half_extents) + radius(axes, fb, rb, b.half_extents)
    proj = np.einsum("nkj,nj->nk", axes, delta)
    overlap = span - np.abs(proj)

    best = np.argmin(overlap, axis=1)
    rows = np.arange(len(best))
    depth = overlap[rows, best]
    normal = axes[rows, best]
    flip = proj[rows, best] < 0.0
    normal[flip] *= -1.0
    hit = np.all(overlap > 0.0, axis=1)
    return hit, normal, np.maximum(depth, 0.0)


def _all_pairs(n):
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def detect_contacts(vehicles, obstacles=None, velocities=None, vv_pairs=None, vo_pairs=None):
    """All overlapping vehicle/vehicle (a < b) and vehicle/obstacle pairs.

    vehicles and obstacles are RectSets; pairs are optional broad-phase
    candidates as index arrays into them. Contact ids are the RectSet ids.
    """
    velocities = np.zeros((len(vehicles), 2)) if velocities is None else velocities
    contacts = []

    i, j = vv_pairs if vv_pairs is not None else _all_pairs(len(vehicles))
    if len(i):
        hit, normal, depth = sat_overlap(vehicles.subset(i), vehicles.subset(j))
        for k in np.flatnonzero(hit):
            a, b = int(i[k]), int(j[k])
            aid, bid = int(vehicles.ids[a]), int(vehicles.ids[b])
            n = normal[k]
            if aid > bid:
                aid, bid, a, b, n = bid, aid, b, a, -n
            rel = float(np.dot(velocities[b] - velocities[a], n))
            contacts.append(Contact(aid, bid, (float(n[0]), float(n[1])), float(depth[k]), rel))

    if obstacles is not None and len(obstacles):
        if vo_pairs is None:
            vi = np.repeat(np.arange(len(vehicles)), len(obstacles))
            oi = np.tile(np.arange(len(obstacles)), len(vehicles))
        else:
            vi, oi = vo_pairs
        if len(vi):
            hit, normal, depth = sat_overlap(vehicles.subset(vi), obstacles.subset(oi))
            for k in np.flatnonzero(hit):
                a = int(vi[k])
                n = normal[k]
                rel = float(-np.dot(velocities[a], n))
                contacts.append(Contact(int(vehicles.ids[a]), int(obstacles.ids[oi[k]]),
                                        (float(n[0]), float(n[1])), float(depth[k]), rel, True))

    contacts.sort(key=lambda c: (c.b_is_obstacle, c.a_id, c.b_id))
    return contacts


# ================================================================== #
#  Response
# ================================================================== #

def resolve_impulse(contact, velocities, positions=None, inv_masses=None,
                    restitution=RESTITUTION, correction=POSITION_CORRECTION):
    """Apply one normal impulse in place.

    velocities / positions are (n, 2) arrays indexed by vehicle id;
    obstacles have infinite mass. Returns the velocities array.
    """
    a, b = contact.a_id, contact.b_id
    n = np.asarray(contact.normal, dtype=float)
    if inv_masses is None:
        inv_a = inv_b = 1.0 / 4000.0
    else:
        inv_a = float(inv_masses[a])
        inv_b = 0.0 if contact.b_is_obstacle else float(inv_masses[b])
    if contact.b_is_obstacle:
        inv_b = 0.0
    total = inv_a + inv_b
    if total <= 0.0:
        return velocities

    vb = np.zeros(2) if contact.b_is_obstacle else velocities[b]
    vn = float(np.dot(vb - velocities[a], n))
    if vn < 0.0:
        j = -(1.0 + restitution) * vn / total
        velocities[a] = velocities[a] - j * inv_a * n
        if not contact.b_is_obstacle:
            velocities[b] = velocities[b] + j * inv_b * n

    if positions is not None and contact.penetration > 0.0:
        push = correction * contact.penetration / total
        positions[a] = positions[a] - push * inv_a * n
        if not contact.b_is_obstacle:
            positions[b] = positions[b] + push * inv_b * n
    return velocities


def classify_impact(yaw_a, yaw_b, normal, b_is_obstacle=False):
    """Rough impact type of a vehicle/vehicle contact seen from vehicle a."""
    if b_is_obstacle:
        return ImpactType.FIXED_OBJECT
    diff = abs((yaw_b - yaw_a + 180.0) % 360.0 - 180.0)
    if diff >= 150.0:
        return ImpactType.HEAD_ON
    if diff > 30.0:
        return ImpactType.T_BONE
    fwd, _ = rect_axes(np.array([yaw_a]))
    along = abs(float(np.dot(fwd[0], normal)))
    return ImpactType.REAR_END if along >= 0.7 else ImpactType.SIDESWIPE


# ================================================================== #
#  Severity
# ================================================================== #

def severity_tick(state, dt, in_contact, other_kind=None, speed=0.0):
    """Advance one vehicle's collision episode by one frame.

    other_kind is the tag of the strongest partner this frame
    (VEHICLE_VEHICLE wins over VEHICLE_NON_VEHICLE).
    The episode kind is fixed on the frame contact starts: a vehicle resting
    against a curb that is then struck by another vehicle stays
    VEHICLE_NON_VEHICLE and adds nothing to vv_count until it separates.
    """
    if state.removed:
        return SeverityUpdate(state)

    if not in_contact:
        if state.in_collision:
            closed = replace(state, in_collision=False, kind=None,
                             stopped_during_collision=0.0, side_rays_disabled=False,
                             serious=False, episode_duration=0.0)
            return SeverityUpdate(closed, exited=True)
        return SeverityUpdate(state)

    entered = False
    if not state.in_collision:
        kind = CollisionKind(other_kind or CollisionKind.VEHICLE_NON_VEHICLE)
        state = replace(
            state, in_collision=True, kind=kind, stopped_during_collision=0.0,
            side_rays_disabled=False, serious=False, episode_duration=0.0,
            vv_count=state.vv_count + (kind is CollisionKind.VEHICLE_VEHICLE),
            vnv_count=state.vnv_count + (kind is CollisionKind.VEHICLE_NON_VEHICLE),
        )
        entered = True

    stopped = state.stopped_during_collision + (dt if speed < STOPPED_SPEED else 0.0)
    state = replace(state, stopped_during_collision=stopped,
                    episode_duration=state.episode_duration + dt)

    became_serious = removed = False
    if stopped > SIDE_RAYS_DISABLE_AFTER and not state.side_rays_disabled:
        state = replace(state, side_rays_disabled=True)
    if stopped > SERIOUS_AFTER and not state.serious:
        state = replace(state, serious=True, serious_count=state.serious_count + 1)
        became_serious = True
    if stopped > REMOVE_AFTER:
        state = replace(state, removed=True)
        removed = True
    return SeverityUpdate(state, entered=entered, became_serious=became_serious, removed=removed)
