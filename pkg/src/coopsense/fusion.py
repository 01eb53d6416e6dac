"""Pixel-level (point cloud) and feature-level (box) vehicle-road fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detection import Detection, DetectorConfig, detect
from .geometry import (
    FRAME_BODY,
    FRAME_SENSOR,
    FRAME_WORLD,
    OrientedBox,
    PointCloud,
    Pose,
    Vec3,
    angle_diff,
    box_iou,
    normalize_angle,
    pose_transform_points,
    vec3,
    vehicle_points_to_world,
)

VEHICLE_MOUNTED = "vehicle_mounted"
ROADSIDE = "roadside"

PIXEL = "pixel"
FEATURE = "feature"

DEFAULT_IOU_THRESHOLD = 0.3
MAX_AGE_TICKS = 2


@dataclass(frozen=True)
class SensorRegistration:
    """Where a sensor sits: a body-frame mount offset or a world pose."""

    sensor_id: str
    kind: str
    mount: Vec3 | Pose

    def __post_init__(self) -> None:
        if self.kind == VEHICLE_MOUNTED:
            if isinstance(self.mount, Pose):
                raise ValueError("vehicle-mounted sensors take a body-frame offset, not a pose")
            object.__setattr__(self, "mount", vec3(self.mount))
        elif self.kind == ROADSIDE:
            if not isinstance(self.mount, Pose):
                # a bare location is the unrotated pole of the roadside mapping
                object.__setattr__(self, "mount", Pose(vec3(self.mount), 0.0))
        else:
            raise ValueError(f"unknown sensor kind {self.kind!r}")

    @property
    def pose(self) -> Pose:
        if self.kind != ROADSIDE:
            raise AttributeError("only roadside registrations carry a world pose")
        return self.mount  # type: ignore[return-value]


@dataclass(frozen=True)
class FusedFrame:
    timestamp: int
    mode: str
    world_cloud: PointCloud | None = None
    world_boxes: tuple[Detection, ...] | None = None
    sources: tuple[str, ...] = ()


def unify_cloud(
    cloud: PointCloud, registration: SensorRegistration, vehicle_pose: Pose | None = None
) -> PointCloud:
    """Re-express a sensor (or body) frame cloud in the world frame."""
    if cloud.source and cloud.source != registration.sensor_id:
        raise ValueError(f"cloud from {cloud.source!r} given registration {registration.sensor_id!r}")
    if registration.kind == VEHICLE_MOUNTED:
        if vehicle_pose is None:
            raise ValueError(f"vehicle pose required to unify vehicle sensor {registration.sensor_id!r}")
        if cloud.frame == FRAME_SENSOR:
            pts = vehicle_points_to_world(cloud.points, registration.mount, vehicle_pose)
        elif cloud.frame == FRAME_BODY:
            pts = pose_transform_points(cloud.points, vehicle_pose)
        else:
            raise ValueError("cloud is already in the world frame")
    else:
        if vehicle_pose is not None:
            raise ValueError("roadside sensors are fixed; do not pass a vehicle pose")
        if cloud.frame != FRAME_SENSOR:
            raise ValueError(f"roadside cloud must be in the sensor frame, got {cloud.frame!r}")
        pts = pose_transform_points(cloud.points, registration.pose)
    return cloud.replace(points=pts, frame=FRAME_WORLD, groups=())


def to_body_frame(cloud: PointCloud, registration: SensorRegistration) -> PointCloud:
    if registration.kind != VEHICLE_MOUNTED or cloud.frame != FRAME_SENSOR:
        raise ValueError("only vehicle sensor-frame clouds move to the body frame")
    pts = cloud.points + np.asarray(registration.mount)
    return cloud.replace(points=pts, frame=FRAME_BODY, groups=())


def merge_clouds(clouds: Sequence[PointCloud]) -> PointCloud:
    """Concatenate world-frame clouds of one timestamp, keeping per-source groups."""
    clouds = list(clouds)
    if not clouds:
        return PointCloud(np.zeros((0, 3)), frame=FRAME_WORLD, source="merged")
    for c in clouds:
        if c.frame != FRAME_WORLD:
            raise ValueError(f"merge needs world-frame clouds, got {c.frame!r} from {c.source!r}")
    stamps = {c.timestamp for c in clouds}
    if len(stamps) != 1:
        raise ValueError(f"merge needs equal timestamps, got {sorted(stamps)}")
    if len(clouds) == 1:
        return clouds[0]
    groups = tuple(g for c in clouds for g in c.groups)
    names = []
    for s, _ in groups:
        if s not in names:
            names.append(s)
    return PointCloud(
        np.concatenate([c.points for c in clouds]),
        frame=FRAME_WORLD,
        timestamp=clouds[0].timestamp,
        source="+".join(names),
        groups=groups,
    )


def box_to_world(
    box: OrientedBox, frame: str, registration: SensorRegistration, vehicle_pose: Pose | None
) -> OrientedBox:
    if frame == FRAME_WORLD:
        return box
    if registration.kind == ROADSIDE:
        if frame != FRAME_SENSOR:
            raise ValueError(f"roadside box in unexpected frame {frame!r}")
        return box.transformed(registration.pose)
    if vehicle_pose is None:
        raise ValueError("vehicle pose required for vehicle-frame boxes")
    if frame == FRAME_SENSOR:
        box = OrientedBox(box.center + registration.mount, box.extent, box.yaw, box.class_label)
    return box.transformed(vehicle_pose)


def _aligned(reference_yaw: float, box: OrientedBox) -> tuple[float, Vec3]:
    """Yaw and extents of ``box`` re-expressed nearest to ``reference_yaw``.

    Footprints are unchanged by half turns, and by quarter turns when the
    x/y extents are swapped, so pick the equivalent closest to the reference.
    """
    yaw, ext = box.yaw, box.extent
    d = angle_diff(yaw, reference_yaw)
    k = round(d / (math.pi / 2.0))
    yaw = normalize_angle(yaw - k * math.pi / 2.0)
    if k % 2:
        ext = Vec3(ext.y, ext.x, ext.z)
    return yaw, ext


def merge_detections(group: Sequence[Detection]) -> Detection:
    """Point-count weighted combination of boxes judged to be one object."""
    if len(group) == 1:
        return group[0]
    seed = group[0]
    w = np.array([float(max(d.point_count, 1)) for d in group])
    centers = np.array([tuple(d.box.center) for d in group])
    center = (w[:, None] * centers).sum(axis=0) / w.sum()
    ref = seed.box.yaw
    yaws, exts = zip(*(_aligned(ref, d.box) for d in group))
    yaw = normalize_angle(ref + sum(wi * angle_diff(y, ref) for wi, y in zip(w, yaws)) / w.sum())
    extent = Vec3(*np.max(np.array(exts), axis=0).tolist())
    sources = []
    for d in group:
        for s in d.source.split("+"):
            if s not in sources:
                sources.append(s)
    return Detection(
        OrientedBox(vec3(center), extent, yaw, seed.box.class_label),
        source="+".join(sources),
        timestamp=seed.timestamp,
        point_count=int(sum(d.point_count for d in group)),
        frame=seed.frame,
    )


def _order_key(d: Detection):
    return (-d.point_count, d.source, tuple(d.box.center))


def _greedy_pass(dets: list[Detection], iou_threshold: float) -> tuple[list[Detection], bool]:
    dets = sorted(dets, key=_order_key)
    absorbed = [False] * len(dets)
    out = []
    merged_any = False
    for i, seed in enumerate(dets):
        if absorbed[i]:
            continue
        group = [seed]
        for j in range(i + 1, len(dets)):
            if absorbed[j]:
                continue
            other = dets[j]
            if other.box.class_label != seed.box.class_label:
                continue
            if box_iou(seed.box, other.box) >= iou_threshold:
                absorbed[j] = True
                group.append(other)
        merged_any |= len(group) > 1
        out.append(merge_detections(group))
    return sorted(out, key=_order_key), merged_any


def fuse_boxes(
    detections: Iterable[Detection], iou_threshold: float = DEFAULT_IOU_THRESHOLD
) -> list[Detection]:
    """Merge same-class world boxes whose footprint IoU reaches the threshold.

    Greedy in descending point count. Passes repeat until nothing merges, so
    the result is a fixed point and re-fusing it changes nothing.
    """
    dets = list(detections)
    while True:
        dets, merged = _greedy_pass(dets, iou_threshold)
        if not merged:
            return dets


def nearest_tick(timestamp: int, tick_period: int) -> int:
    """Snap a timestamp to the closest tick (half-tick tolerance, ties up)."""
    return ((timestamp + tick_period // 2) // tick_period) * tick_period


def is_stale(timestamp: int, now: int, tick_period: int, max_age_ticks: int = MAX_AGE_TICKS) -> bool:
    return now - timestamp > max_age_ticks * tick_period


def fuse_frame(
    mode: str,
    clouds: Sequence[PointCloud],
    registrations: Mapping[str, SensorRegistration],
    vehicle_pose: Pose | None = None,
    *,
    remote_clouds: Sequence[PointCloud] = (),
    remote_detections: Sequence[Detection] = (),
    detector: DetectorConfig | None = None,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    timestamp: int | None = None,
    tick_period: int = 100_000,
) -> FusedFrame:
    """Combine local sensor scans and already-world remote data for one tick.

    ``pixel``: every cloud is unified into the world frame and concatenated;
    detection runs later on the merged cloud (:func:`frame_detections`).
    ``feature``: each local cloud is detected on its own, boxes are moved to
    the world frame and fused with the remote boxes.

    Remote inputs older than two ticks are discarded; the rest are snapped
    to this frame's tick.
    """
    detector = detector or DetectorConfig()
    if timestamp is None:
        if not clouds:
            raise ValueError("timestamp required when there are no local clouds")
        timestamp = clouds[0].timestamp

    def fresh(ts: int) -> bool:
        return not is_stale(ts, timestamp, tick_period)

    def reg(c: PointCloud) -> SensorRegistration:
        try:
            return registrations[c.source]
        except KeyError:
            raise ValueError(f"no registration for sensor {c.source!r}") from None

    def pose_for(r: SensorRegistration) -> Pose | None:
        return vehicle_pose if r.kind == VEHICLE_MOUNTED else None

    remote_clouds = [c.replace(timestamp=timestamp) for c in remote_clouds if fresh(c.timestamp)]
    remote_detections = [
        Detection(d.box, d.source, timestamp, d.point_count, d.frame)
        for d in remote_detections
        if fresh(d.timestamp)
    ]
    for c in remote_clouds:
        if c.frame != FRAME_WORLD:
            raise ValueError("remote clouds must already be in the world frame")

    if mode == PIXEL:
        if remote_detections:
            raise ValueError("pixel-level fusion shares point clouds, not boxes")
        world = [unify_cloud(c, reg(c), pose_for(reg(c))).replace(timestamp=timestamp) for c in clouds]
        merged = merge_clouds(world + list(remote_clouds))
        if merged.timestamp != timestamp:
            merged = merged.replace(timestamp=timestamp)
        sources = tuple(dict.fromkeys([c.source for c in clouds] + [c.source for c in remote_clouds]))
        return FusedFrame(timestamp, PIXEL, world_cloud=merged, sources=sources)

    if mode != FEATURE:
        raise ValueError(f"unknown fusion mode {mode!r}")
    if remote_clouds:
        raise ValueError("feature-level fusion shares boxes, not point clouds")
    boxes: list[Detection] = []
    for c in clouds:
        r = reg(c)
        if r.kind == VEHICLE_MOUNTED:
            if vehicle_pose is None:
                raise ValueError(f"vehicle pose required for sensor {r.sensor_id!r}")
            local = to_body_frame(c, r) if c.frame == FRAME_SENSOR else c
        else:
            local = unify_cloud(c, r)
        for d in detect(local, detector):
            world_box = box_to_world(d.box, local.frame, r, pose_for(r))
            boxes.append(Detection(world_box, d.source, timestamp, d.point_count, FRAME_WORLD))
    boxes.extend(remote_detections)
    sources = tuple(dict.fromkeys([c.source for c in clouds] + [d.source for d in remote_detections]))
    return FusedFrame(
        timestamp, FEATURE, world_boxes=tuple(fuse_boxes(boxes, iou_threshold)), sources=sources
    )


def frame_detections(frame: FusedFrame, detector: DetectorConfig | None = None) -> list[Detection]:
    """World-frame detections of a fused frame (runs detection for pixel mode)."""
    if frame.mode == FEATURE:
        return list(frame.world_boxes or ())
    return detect(frame.world_cloud, detector or DetectorConfig())
