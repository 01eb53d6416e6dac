"""Frames, poses, rigid transforms and oriented-box overlap.

Conventions used everywhere in the package:

- right-handed frames, z up, meters;
- yaw is counter-clockwise about +z, normalized to (-pi, pi];
- overlap metrics are computed on the 2D xy footprint of a box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

CLASS_LABELS = ("vehicle", "pedestrian", "bicycle", "unknown")

FRAME_SENSOR = "sensor"
FRAME_BODY = "vehicle-body"
FRAME_WORLD = "world"
FRAMES = (FRAME_SENSOR, FRAME_BODY, FRAME_WORLD)

_DEGENERATE_AREA = 1e-12


class DegenerateBoxError(ValueError):
    """Raised when a ground-truth footprint has (near) zero area."""


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def __add__(self, other):  # type: ignore[override]
        return Vec3(self.x + other[0], self.y + other[1], self.z + other[2])

    def __sub__(self, other):
        return Vec3(self.x - other[0], self.y - other[1], self.z - other[2])

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


def vec3(p: Sequence[float]) -> Vec3:
    """Coerce any length-3 sequence into a finite ``Vec3``."""
    x, y, z = (float(c) for c in p)
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValueError(f"non-finite vector {p!r}")
    return Vec3(x, y, z)


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(float(a), 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def angle_diff(a: float, b: float) -> float:
    """Shortest signed arc from ``b`` to ``a``."""
    return normalize_angle(a - b)


@dataclass(frozen=True, slots=True)
class Pose:
    """Planar rigid placement: a position plus a yaw about +z."""

    position: Vec3 = Vec3(0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", vec3(self.position))
        if not math.isfinite(self.yaw):
            raise ValueError("yaw must be finite")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @classmethod
    def from_xyyaw(cls, x: float, y: float, yaw: float, z: float = 0.0) -> "Pose":
        return cls(Vec3(float(x), float(y), float(z)), yaw)

    def transform_point(self, p: Sequence[float]) -> Vec3:
        return rotate_z(p, self.yaw) + self.position

    def inverse_transform_point(self, p: Sequence[float]) -> Vec3:
        return rotate_z(vec3(p) - self.position, -self.yaw)


@dataclass(frozen=True, slots=True)
class RotationZ:
    """Rotation about +z; the 3x3 matrix is the ``R`` used for vehicle frames."""

    yaw: float

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def apply(self, p: Sequence[float]) -> Vec3:
        return rotate_z(p, self.yaw)

    def inverse(self) -> "RotationZ":
        return RotationZ(-self.yaw)


def rotate_z(p: Sequence[float], yaw: float) -> Vec3:
    x, y, z = p
    c, s = math.cos(yaw), math.sin(yaw)
    return Vec3(x * c - y * s, x * s + y * c, float(z))


def road_to_world(p_road: Sequence[float], road_location: Sequence[float] | Pose) -> Vec3:
    """Map a roadside-sensor point into the world frame.

    ``road_location`` is either the sensor's world position (pure
    translation) or a full :class:`Pose` when the pole is rotated.
    """
    if isinstance(road_location, Pose):
        return road_location.transform_point(p_road)
    return vec3(p_road) + vec3(road_location)


def world_to_road(p_world: Sequence[float], road_location: Sequence[float] | Pose) -> Vec3:
    if isinstance(road_location, Pose):
        return road_location.inverse_transform_point(p_world)
    return vec3(p_world) - vec3(road_location)


def vehicle_to_world(p_vehicle: Sequence[float], mount: Sequence[float], vehicle_pose: Pose) -> Vec3:
    """Map a vehicle-lidar point to world: shift by the mount, rotate, translate."""
    body = vec3(p_vehicle) + vec3(mount)
    return rotate_z(body, vehicle_pose.yaw) + vehicle_pose.position


def world_to_vehicle(p_world: Sequence[float], mount: Sequence[float], vehicle_pose: Pose) -> Vec3:
    body = rotate_z(vec3(p_world) - vehicle_pose.position, -vehicle_pose.yaw)
    return body - vec3(mount)


# Vectorized forms over (N, 3) arrays.

def rotate_z_points(points: np.ndarray, yaw: float) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c, s = math.cos(yaw), math.sin(yaw)
    out = np.empty_like(pts)
    out[:, 0] = pts[:, 0] * c - pts[:, 1] * s
    out[:, 1] = pts[:, 0] * s + pts[:, 1] * c
    out[:, 2] = pts[:, 2]
    return out


def pose_transform_points(points: np.ndarray, pose: Pose) -> np.ndarray:
    return rotate_z_points(points, pose.yaw) + np.asarray(pose.position)


def pose_inverse_transform_points(points: np.ndarray, pose: Pose) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3) - np.asarray(pose.position)
    return rotate_z_points(pts, -pose.yaw)


def vehicle_points_to_world(points: np.ndarray, mount: Sequence[float], vehicle_pose: Pose) -> np.ndarray:
    body = np.asarray(points, dtype=np.float64).reshape(-1, 3) + np.asarray(vec3(mount))
    return pose_transform_points(body, vehicle_pose)


def world_points_to_vehicle(points: np.ndarray, mount: Sequence[float], vehicle_pose: Pose) -> np.ndarray:
    return pose_inverse_transform_points(points, vehicle_pose) - np.asarray(vec3(mount))


@dataclass(frozen=True, slots=True)
class OrientedBox:
    """3D box given by center, half-lengths along its local axes, and yaw."""

    center: Vec3
    extent: Vec3
    yaw: float = 0.0
    class_label: str = "unknown"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", vec3(self.center))
        ext = vec3(self.extent)
        if min(ext) <= 0.0:
            raise ValueError(f"box extents must be strictly positive, got {ext}")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))
        if self.class_label not in CLASS_LABELS:
            raise ValueError(f"unknown class label {self.class_label!r}")

    @property
    def length(self) -> float:
        return 2.0 * self.extent.x

    @property
    def width(self) -> float:
        return 2.0 * self.extent.y

    @property
    def height(self) -> float:
        return 2.0 * self.extent.z

    def corners(self) -> np.ndarray:
        """Eight corners, bottom face first, each face counter-clockwise."""
        ex, ey, ez = self.extent
        local = np.array(
            [
                [ex, ey, -ez], [-ex, ey, -ez], [-ex, -ey, -ez], [ex, -ey, -ez],
                [ex, ey, ez], [-ex, ey, ez], [-ex, -ey, ez], [ex, -ey, ez],
            ]
        )
        return rotate_z_points(local, self.yaw) + np.asarray(self.center)

    @classmethod
    def from_corners(cls, corners: np.ndarray, class_label: str = "unknown") -> "OrientedBox":
        """Inverse of :meth:`corners` for corners in that same ordering."""
        c = np.asarray(corners, dtype=np.float64).reshape(8, 3)
        center = c.mean(axis=0)
        along = c[0] - c[1]
        across = c[0] - c[3]
        vertical = c[4] - c[0]
        yaw = math.atan2(along[1], along[0])
        extent = (
            float(np.linalg.norm(along[:2])) / 2.0,
            float(np.linalg.norm(across[:2])) / 2.0,
            float(abs(vertical[2])) / 2.0,
        )
        return cls(vec3(center), vec3(extent), yaw, class_label)

    def footprint(self) -> np.ndarray:
        """(4, 2) xy polygon, counter-clockwise."""
        return self.corners()[:4, :2]

    def transformed(self, pose: Pose) -> "OrientedBox":
        """Express this box in the parent frame of ``pose``."""
        return OrientedBox(
            pose.transform_point(self.center), self.extent, self.yaw + pose.yaw, self.class_label
        )

    def with_label(self, class_label: str) -> "OrientedBox":
        return OrientedBox(self.center, self.extent, self.yaw, class_label)

    def contains_xy(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        local = rotate_z_points(pts - np.asarray(self.center), -self.yaw)
        return (np.abs(local[:, 0]) <= self.extent.x + margin) & (
            np.abs(local[:, 1]) <= self.extent.y + margin
        )


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertices."""
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by a convex CCW ``clip``."""
    output = [tuple(v) for v in np.asarray(subject, dtype=np.float64)]
    clip = np.asarray(clip, dtype=np.float64)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inputs, output = output, []
        prev = inputs[-1]
        prev_side = side(prev)
        for cur in inputs:
            cur_side = side(cur)
            if cur_side >= 0.0:
                if prev_side < 0.0:
                    output.append(_intersect(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= 0.0:
                output.append(_intersect(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def footprint_intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    # cheap reject on bounding circles
    dx = a.center.x - b.center.x
    dy = a.center.y - b.center.y
    ra = math.hypot(a.extent.x, a.extent.y)
    rb = math.hypot(b.extent.x, b.extent.y)
    if dx * dx + dy * dy > (ra + rb) ** 2:
        return 0.0
    poly = clip_convex_polygon(a.footprint(), b.footprint())
    return max(0.0, polygon_area(poly))


def footprint_area(box: OrientedBox) -> float:
    return 4.0 * box.extent.x * box.extent.y


def box_overlap_ratio(detected: OrientedBox, truth: OrientedBox) -> float:
    """Intersection of the two footprints divided by the truth footprint area."""
    truth_area = footprint_area(truth)
    if truth_area < _DEGENERATE_AREA:
        raise DegenerateBoxError(f"ground-truth footprint area {truth_area:g} m^2 is degenerate")
    ratio = footprint_intersection_area(detected, truth) / truth_area
    return min(1.0, max(0.0, ratio))


def box_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Footprint intersection over footprint union (symmetric)."""
    area_a, area_b = footprint_area(a), footprint_area(b)
    if area_a < _DEGENERATE_AREA and area_b < _DEGENERATE_AREA:
        return 0.0
    inter = footprint_intersection_area(a, b)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def box_iou_3d(a: OrientedBox, b: OrientedBox) -> float:
    """Footprint intersection times z-interval overlap, over volume union."""
    z_lo = max(a.center.z - a.extent.z, b.center.z - b.extent.z)
    z_hi = min(a.center.z + a.extent.z, b.center.z + b.extent.z)
    dz = max(0.0, z_hi - z_lo)
    inter = footprint_intersection_area(a, b) * dz
    vol_a = footprint_area(a) * a.height
    vol_b = footprint_area(b) * b.height
    union = vol_a + vol_b - inter
    return 0.0 if union <= 0.0 else min(1.0, inter / union)


def footprint_distance(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum xy distance between two footprints; 0 when they intersect."""
    if footprint_intersection_area(a, b) > 0.0:
        return 0.0
    pa, pb = a.footprint(), b.footprint()
    best = math.inf
    for poly_p, poly_q in ((pa, pb), (pb, pa)):
        for p in poly_p:
            for i in range(4):
                best = min(best, _point_segment_distance(p, poly_q[i], poly_q[(i + 1) % 4]))
    return best


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    d = p - (a + t * ab)
    return math.hypot(d[0], d[1])


def weighted_mean_angle(angles: Iterable[float], weights: Iterable[float]) -> float:
    """Weighted mean of angles along the shortest arc from the first one."""
    angles = list(angles)
    weights = list(weights)
    ref = angles[0]
    total = sum(weights)
    acc = sum(w * angle_diff(a, ref) for a, w in zip(angles, weights))
    return normalize_angle(ref + acc / total)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Timestamped (N, 3) points tagged with their frame and source.

    ``beam_index`` records which lidar beam produced each point (sensor
    scans only) and ``beam_grid`` the (azimuths, channels) grid it indexes.
    ``groups`` lists ``(source, count)`` runs for merged clouds.
    """

    points: np.ndarray
    frame: str = FRAME_SENSOR
    timestamp: int = 0
    source: str = ""
    beam_index: np.ndarray | None = None
    beam_grid: tuple[int, int] | None = None
    groups: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.beam_index is not None:
            idx = np.array(self.beam_index, dtype=np.int64).reshape(-1)
            if len(idx) != len(pts):
                raise ValueError("beam_index length must match points")
            idx.setflags(write=False)
            object.__setattr__(self, "beam_index", idx)
        if not self.groups:
            object.__setattr__(self, "groups", ((self.source, len(pts)),) if len(pts) else ())
        elif sum(n for _, n in self.groups) != len(pts):
            raise ValueError("group counts must sum to the number of points")

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        same_idx = (self.beam_index is None and other.beam_index is None) or (
            self.beam_index is not None
            and other.beam_index is not None
            and np.array_equal(self.beam_index, other.beam_index)
        )
        return (
            self.frame == other.frame
            and self.timestamp == other.timestamp
            and self.source == other.source
            and self.beam_grid == other.beam_grid
            and self.groups == other.groups
            and same_idx
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None  # type: ignore[assignment]

    def sources(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.groups)

    def replace(self, **changes) -> "PointCloud":
        fields = {
            "points": self.points,
            "frame": self.frame,
            "timestamp": self.timestamp,
            "source": self.source,
            "beam_index": self.beam_index,
            "beam_grid": self.beam_grid,
            "groups": self.groups,
        }
        fields.update(changes)
        return PointCloud(**fields)
