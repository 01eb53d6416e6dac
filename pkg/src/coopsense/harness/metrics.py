"""Safety and accuracy metrics used to compare solo and cooperative perception."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from ..detection import Detection
from ..geometry import OrientedBox, Pose, footprint_distance
from ..sensors import LidarConfig, ray_box_distances, vehicle_sensor_pose
from ..world import Snapshot

# Deceleration and driver/system reaction time; with these 30 km/h needs 12.7 m.
BRAKING_DECELERATION = 5.0
REACTION_TIME = 0.69

# ground truth association radius for detections and tracks
TRUTH_RADIUS = 2.0

# published overlap figures, kept in reports for comparison only
REFERENCE_OVERLAP = {"vehicle": 0.929, "road": 0.928, "fused": 0.937}


def required_braking_distance(speed: float) -> float:
    """Reaction distance plus braking distance at constant deceleration, in m."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    return speed * speed / (2.0 * BRAKING_DECELERATION) + speed * REACTION_TIME


def truth_actor_for(box: OrientedBox, snapshot: Snapshot, radius: float = TRUTH_RADIUS) -> int | None:
    """Actor whose true footprint lies nearest the box center, if within ``radius``."""
    probe = OrientedBox(box.center, (1e-3, 1e-3, 1e-3))
    best, best_d = None, math.inf
    for st in snapshot.states:
        d = footprint_distance(probe, st.box)
        if d < best_d:
            best, best_d = st.actor_id, d
    return best if best_d <= radius else None


def detection_of(
    detections: Iterable[Detection], actor_id: int, snapshot: Snapshot
) -> Detection | None:
    """The highest-support detection attributed to ``actor_id``."""
    for d in detections:
        if truth_actor_for(d.box, snapshot) == actor_id:
            return d
    return None


def occlusion_profile(
    ego_pose: Pose, blocker: OrientedBox, config: LidarConfig
) -> list[tuple[float, float]]:
    """Azimuth intervals hidden by ``blocker`` for a vehicle lidar.

    A beam counts as blocked when the horizontal ray at the lidar height
    meets the blocker within range. Intervals are in ego-frame degrees
    measured clockwise from straight ahead, so the right side is 0..180.
    """
    sensor = vehicle_sensor_pose(ego_pose, config.mount)
    az = config.azimuths()
    world_dirs = np.stack(
        [np.cos(az + sensor.yaw), np.sin(az + sensor.yaw), np.zeros_like(az)], axis=1
    )
    dist = ray_box_distances(np.asarray(sensor.position), world_dirs, blocker)
    blocked = dist <= config.max_range
    right_deg = np.mod(-np.degrees(az), 360.0)
    order = np.argsort(right_deg, kind="stable")
    right_deg, blocked = right_deg[order], blocked[order]
    step = 360.0 / len(az)
    intervals: list[tuple[float, float]] = []
    start = None
    for deg, b in zip(right_deg, blocked):
        if b and start is None:
            start = deg
        elif not b and start is not None:
            intervals.append((float(start), float(deg - step)))
            start = None
    if start is not None:
        intervals.append((float(start), float(right_deg[-1])))
    # join a run that wraps through 0 degrees
    if len(intervals) > 1 and intervals[0][0] == 0.0 and intervals[-1][1] >= 360.0 - step * 1.5:
        first = intervals.pop(0)
        last = intervals.pop()
        intervals.append((last[0] - 360.0, first[1]))
    return intervals


def azimuth_right_deg(ego_pose: Pose, point: Sequence[float]) -> float:
    """Bearing of a world point from the ego, clockwise from ahead, in [0, 360)."""
    dx = point[0] - ego_pose.position.x
    dy = point[1] - ego_pose.position.y
    rel = math.atan2(dy, dx) - ego_pose.yaw
    return float(np.mod(-math.degrees(rel), 360.0))


def interval_contains(intervals: Sequence[tuple[float, float]], deg: float) -> bool:
    return any(lo <= deg <= hi or lo <= deg - 360.0 <= hi for lo, hi in intervals)


def mean(values: Sequence[float]) -> float | None:
    return float(sum(values) / len(values)) if values else None
