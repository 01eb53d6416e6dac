"""Roadside publisher and vehicle subscriber nodes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..detection import Detection, DetectorConfig, detect, eliminate_static
from ..fusion import (
    FEATURE,
    PIXEL,
    VEHICLE_MOUNTED,
    FusedFrame,
    SensorRegistration,
    frame_detections,
    fuse_frame,
    is_stale,
    unify_cloud,
)
from ..geometry import FRAME_WORLD, PointCloud, Pose
from ..sensors import (
    GnssPair,
    LidarConfig,
    estimate_vehicle_pose,
    read_gnss,
    scan_lidar,
    vehicle_sensor_pose,
)
from ..tracking import Track, Tracker
from ..world import Snapshot
from .codec import (
    FIXED_OVERHEAD,
    KIND_BOXES,
    KIND_CLOUD,
    MAX_DATAGRAM,
    POINT_RECORD,
    CodecError,
    CrcMismatch,
    PerceptionMessage,
    UnsupportedVersion,
    WireBox,
    decode,
    encode,
)

log = logging.getLogger(__name__)

MAX_CLOUD_POINTS = (MAX_DATAGRAM - FIXED_OVERHEAD) // POINT_RECORD.size


def downsample_to_fit(points: np.ndarray, max_points: int = MAX_CLOUD_POINTS) -> np.ndarray:
    """Keep every k-th point, with the smallest k that fits ``max_points``."""
    n = len(points)
    if n <= max_points:
        return points
    k = math.ceil(n / max_points)
    return points[::k]


def remote_source(sender_id: int) -> str:
    return f"v2i:{sender_id}"


def message_detections(msg: PerceptionMessage) -> list[Detection]:
    return [
        Detection(wb.box, remote_source(msg.sender_id), msg.timestamp, wb.point_count, FRAME_WORLD)
        for wb in msg.boxes
    ]


def message_cloud(msg: PerceptionMessage) -> PointCloud:
    return PointCloud(msg.points, FRAME_WORLD, msg.timestamp, remote_source(msg.sender_id))


class RoadsideNode:
    """Fixed pole lidar that detects movers and shares world-frame results."""

    def __init__(
        self,
        registration: SensorRegistration,
        lidar: LidarConfig,
        transport,
        *,
        sender_id: int = 1,
        detector: DetectorConfig | None = None,
        background: PointCloud | None = None,
        cadence: int = 1,
        mode: str = FEATURE,
        eliminate_in_pixel_mode: bool = True,
    ):
        if cadence < 1:
            raise ValueError("cadence must be >= 1")
        self.registration = registration
        self.lidar = lidar
        self.transport = transport
        self.sender_id = sender_id
        self.detector = detector or DetectorConfig()
        self.background = background
        self.cadence = cadence
        self.mode = mode
        self.eliminate_in_pixel_mode = eliminate_in_pixel_mode
        self.scan: PointCloud | None = None
        self.send_failures = 0

    @property
    def sensor_id(self) -> str:
        return self.registration.sensor_id

    def sense(self, snapshot: Snapshot) -> PointCloud:
        self.scan = scan_lidar(self.lidar, self.registration.pose, snapshot, source=self.sensor_id)
        return self.scan

    def moving_cloud(self) -> PointCloud:
        """Current scan with background removed, in the world frame."""
        if self.scan is None:
            raise RuntimeError("no current scan; call sense() first")
        cloud = self.scan
        if self.background is not None:
            cloud = eliminate_static(cloud, self.background, self.detector.background_tolerance)
        return unify_cloud(cloud, self.registration)

    def detections(self) -> list[Detection]:
        return detect(self.moving_cloud(), self.detector)

    def build_message(self) -> PerceptionMessage:
        ts = self.scan.timestamp
        if self.mode == PIXEL:
            if self.eliminate_in_pixel_mode:
                pts = self.moving_cloud().points
            else:
                pts = unify_cloud(self.scan, self.registration).points
            return PerceptionMessage(self.sender_id, ts, KIND_CLOUD, points=downsample_to_fit(pts))
        boxes = tuple(WireBox(d.box, d.point_count) for d in self.detections())
        return PerceptionMessage(self.sender_id, ts, KIND_BOXES, boxes=boxes)

    def publish(self, tick: int) -> list[bytes]:
        """Send this tick's message if the cadence allows; an empty scene still sends."""
        if tick % self.cadence:
            return []
        data = encode(self.build_message(), max_size=MAX_DATAGRAM)
        try:
            self.transport.send(data)
        except OSError as exc:
            self.send_failures += 1
            log.warning("roadside %s: send failed: %s", self.sensor_id, exc)
            return []
        return [data]


@dataclass
class IngestStats:
    accepted: int = 0
    stale: int = 0
    parse_errors: int = 0
    crc_errors: int = 0
    version_errors: int = 0

    @property
    def rejected(self) -> int:
        return self.stale + self.parse_errors + self.crc_errors + self.version_errors


@dataclass
class VehicleOutput:
    timestamp: int
    pose: Pose
    frame: FusedFrame
    detections: list[Detection]
    solo_detections: list[Detection]
    tracks: list[Track]
    remote_senders: tuple[int, ...] = ()


@dataclass
class VehicleNode:
    """Ego vehicle: own lidar + GNSS, optional remote data, fusion and tracking.

    Perception never waits on the network; with an empty buffer the node
    runs its solo pipeline.
    """

    actor_id: int
    lidar: LidarConfig
    gnss: GnssPair = field(default_factory=GnssPair)
    sensor_id: str = "ego_lidar"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    fusion_mode: str = FEATURE
    tracker: Tracker = field(default_factory=Tracker)
    iou_threshold: float = 0.3
    tick_period: int = 100_000
    max_age_ticks: int = 2

    def __post_init__(self) -> None:
        self.registration = SensorRegistration(self.sensor_id, VEHICLE_MOUNTED, self.lidar.mount)
        self.buffer: dict[int, PerceptionMessage] = {}
        self.stats = IngestStats()

    def ingest(self, data: bytes, now: int) -> bool:
        """Validate and buffer one datagram; bad input is counted, never raised."""
        try:
            msg = decode(data)
        except CrcMismatch:
            self.stats.crc_errors += 1
            return False
        except UnsupportedVersion:
            self.stats.version_errors += 1
            return False
        except CodecError:
            self.stats.parse_errors += 1
            return False
        if is_stale(msg.timestamp, now, self.tick_period, self.max_age_ticks):
            self.stats.stale += 1
            return False
        held = self.buffer.get(msg.sender_id)
        if held is None or msg.timestamp >= held.timestamp:
            self.buffer[msg.sender_id] = msg
        self.stats.accepted += 1
        return True

    def _fresh_messages(self, now: int) -> list[PerceptionMessage]:
        for sender in [s for s, m in self.buffer.items() if is_stale(m.timestamp, now, self.tick_period, self.max_age_ticks)]:
            del self.buffer[sender]
        return [self.buffer[s] for s in sorted(self.buffer)]

    def perceive(self, snapshot: Snapshot) -> VehicleOutput:
        now = snapshot.timestamp
        truth = snapshot.pose(self.actor_id)
        pose = estimate_vehicle_pose(self.gnss, read_gnss(self.gnss, truth, now))
        cloud = scan_lidar(
            self.lidar,
            vehicle_sensor_pose(truth, self.lidar.mount),
            snapshot,
            source=self.sensor_id,
            exclude=(self.actor_id,),
        )
        regs = {self.sensor_id: self.registration}
        solo_frame = fuse_frame(
            self.fusion_mode, [cloud], regs, pose,
            detector=self.detector, iou_threshold=self.iou_threshold, timestamp=now,
            tick_period=self.tick_period,
        )
        solo = frame_detections(solo_frame, self.detector)
        messages = self._fresh_messages(now)
        if messages:
            remote_boxes = [d for m in messages if m.payload_kind == KIND_BOXES for d in message_detections(m)]
            remote_clouds = [message_cloud(m) for m in messages if m.payload_kind == KIND_CLOUD]
            if self.fusion_mode == PIXEL:
                if remote_boxes:
                    log.debug("pixel mode ignores %d remote boxes", len(remote_boxes))
                frame = fuse_frame(
                    PIXEL, [cloud], regs, pose, remote_clouds=remote_clouds,
                    detector=self.detector, timestamp=now, tick_period=self.tick_period,
                )
            else:
                if remote_clouds:
                    log.debug("feature mode ignores %d remote clouds", len(remote_clouds))
                frame = fuse_frame(
                    FEATURE, [cloud], regs, pose, remote_detections=remote_boxes,
                    detector=self.detector, iou_threshold=self.iou_threshold, timestamp=now,
                    tick_period=self.tick_period,
                )
            detections = frame_detections(frame, self.detector)
        else:
            frame, detections = solo_frame, solo
        tracks = self.tracker.update(detections, now)
        return VehicleOutput(
            now, pose, frame, detections, solo, tracks, tuple(m.sender_id for m in messages)
        )
