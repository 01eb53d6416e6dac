"""Geometric object detection on lidar point clouds.

Clusters points by single-linkage Euclidean distance in xy, fits each cluster
with the minimum-area enclosing rectangle of its convex hull, and labels it
from the footprint size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import FRAME_SENSOR, OrientedBox, PointCloud, Vec3, normalize_angle
from .sensors import beam_ranges

# (label, max footprint length, max footprint width), checked in order
DEFAULT_CLASS_TABLE: tuple[tuple[str, float, float], ...] = (
    ("pedestrian", 1.0, 1.0),
    ("bicycle", 2.2, 1.0),
    ("vehicle", 6.0, 2.6),
)

MIN_HALF_EXTENT = 0.05

# relative area slack inside which rectangle candidates count as tied
AREA_TIE_TOLERANCE = 0.05


@dataclass(frozen=True)
class DetectorConfig:
    cluster_radius: float = 0.7
    min_cluster_size: int = 5
    class_table: tuple[tuple[str, float, float], ...] = DEFAULT_CLASS_TABLE
    background_tolerance: float = 0.15

    def __post_init__(self) -> None:
        if self.cluster_radius <= 0:
            raise ValueError("cluster_radius must be positive")
        if self.min_cluster_size < 3:
            raise ValueError("min_cluster_size must be >= 3")
        object.__setattr__(self, "class_table", tuple(tuple(row) for row in self.class_table))


@dataclass(frozen=True)
class Detection:
    box: OrientedBox
    source: str = ""
    timestamp: int = 0
    point_count: int = 0
    frame: str = field(default="world")

    def with_box(self, box: OrientedBox, frame: str | None = None) -> "Detection":
        return Detection(box, self.source, self.timestamp, self.point_count, frame or self.frame)


def eliminate_static(cloud: PointCloud, background: PointCloud, tolerance: float) -> PointCloud:
    """Drop points whose beam range matches the background scan within ``tolerance``."""
    if cloud.beam_grid is None or cloud.beam_index is None:
        raise ValueError("cloud has no beam indices; static elimination needs a raw sensor scan")
    if background.beam_grid != cloud.beam_grid:
        raise ValueError(f"beam grid mismatch: {cloud.beam_grid} vs {background.beam_grid}")
    if len(cloud) == 0:
        return cloud
    bg = beam_ranges(background)
    r = np.linalg.norm(cloud.points, axis=1)
    keep = ~(np.abs(r - bg[cloud.beam_index]) <= tolerance)
    return cloud.replace(points=cloud.points[keep], beam_index=cloud.beam_index[keep], groups=())


def cluster_xy(points: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage cluster labels for points closer than ``radius`` in xy.

    Points are bucketed into square cells whose diagonal equals ``radius``,
    so every cell is internally connected. Only pairs of nearby cells then
    need a nearest-pair test, which keeps dense scans cheap.
    """
    xy = np.asarray(points, dtype=np.float64).reshape(-1, 3)[:, :2]
    n = len(xy)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if radius <= 0:
        raise ValueError("radius must be positive")
    cell = radius / math.sqrt(2.0)
    keys = np.floor(xy / cell).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    index = {(int(k[0]), int(k[1])): i for i, k in enumerate(uniq)}
    members = [xy[order[bounds[i]:bounds[i + 1]]] for i in range(len(uniq))]

    parent = list(range(len(uniq)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    r2 = radius * radius
    for i, (cx, cy) in enumerate(map(tuple, uniq)):
        for dx, dy in _NEIGHBOR_OFFSETS:
            j = index.get((cx + dx, cy + dy))
            if j is None:
                continue
            ri, rj = find(i), find(j)
            if ri == rj:
                continue
            if _sets_within(members[i], members[j], r2):
                parent[rj] = ri
    roots = np.array([find(i) for i in range(len(uniq))])
    _, cell_labels = np.unique(roots, return_inverse=True)
    return cell_labels.reshape(-1)[inverse].astype(np.int64)


# cells within two steps can hold points closer than the cell diagonal
_NEIGHBOR_OFFSETS = tuple(
    (dx, dy) for dx in range(-2, 3) for dy in range(-2, 3) if (dx, dy) > (0, 0)
)


def _sets_within(a: np.ndarray, b: np.ndarray, r2: float) -> bool:
    if len(a) * len(b) <= 4096:
        d = a[:, None, :] - b[None, :, :]
        return bool(np.any(np.einsum("ijk,ijk->ij", d, d) <= r2))
    dist, _ = cKDTree(b).query(a, k=1)
    return bool(np.any(dist * dist <= r2))


def convex_hull(xy: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; CCW, no collinear vertices.

    Large inputs are first thinned to Qhull's hull vertices.
    """
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if len(xy) > 64:
        try:
            xy = xy[ConvexHull(xy).vertices]
        except QhullError:
            pass
    pts = sorted(set(map(tuple, xy)))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.float64).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def min_area_rectangle(
    xy: np.ndarray, tie_tolerance: float = AREA_TIE_TOLERANCE
) -> tuple[float, float, float, float, float]:
    """Rotating-calipers minimum-area rectangle around a 2D point set.

    An L-shaped scan of two box faces has a triangular hull, for which the
    leg-aligned and hypotenuse-aligned rectangles have the same area. Hull
    edges within ``tie_tolerance`` (relative) of the minimum area are
    therefore ranked by how closely the points hug the rectangle boundary.

    Returns ``(cx, cy, half_length, half_width, yaw)`` with
    ``half_length >= half_width`` and yaw in (-pi/2, pi/2].
    """
    pts = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    hull = convex_hull(pts)
    if len(hull) == 1:
        return float(hull[0, 0]), float(hull[0, 1]), 0.0, 0.0, 0.0
    if len(hull) == 2:
        angles = [math.atan2(hull[1, 1] - hull[0, 1], hull[1, 0] - hull[0, 0])]
    else:
        edges = np.roll(hull, -1, axis=0) - hull
        angles = np.arctan2(edges[:, 1], edges[:, 0]).tolist()
    cands = []
    for theta in angles:
        c, s = math.cos(theta), math.sin(theta)
        u = hull[:, 0] * c + hull[:, 1] * s
        v = -hull[:, 0] * s + hull[:, 1] * c
        u0, u1, v0, v1 = u.min(), u.max(), v.min(), v.max()
        cands.append(((u1 - u0) * (v1 - v0), theta, u0, u1, v0, v1))
    min_area = min(c[0] for c in cands)
    close = [c for c in cands if c[0] <= min_area * (1.0 + tie_tolerance) + 1e-12]
    if len(close) > 1:
        best = min(close, key=lambda c: (_boundary_gap(pts, *c[1:]), c[0]))
    else:
        best = close[0]
    _, theta, u0, u1, v0, v1 = best
    c, s = math.cos(theta), math.sin(theta)
    um, vm = (u0 + u1) / 2.0, (v0 + v1) / 2.0
    cx, cy = um * c - vm * s, um * s + vm * c
    hl, hw = (u1 - u0) / 2.0, (v1 - v0) / 2.0
    if hw > hl:
        hl, hw = hw, hl
        theta += math.pi / 2.0
    return float(cx), float(cy), float(hl), float(hw), _half_turn_yaw(theta)


def _boundary_gap(pts, theta, u0, u1, v0, v1) -> float:
    """Mean distance from the points to the nearest side of a rectangle."""
    c, s = math.cos(theta), math.sin(theta)
    u = pts[:, 0] * c + pts[:, 1] * s
    v = -pts[:, 0] * s + pts[:, 1] * c
    gap = np.minimum(np.minimum(u - u0, u1 - u), np.minimum(v - v0, v1 - v))
    return float(np.mean(np.maximum(gap, 0.0)))


def _half_turn_yaw(theta: float) -> float:
    """Boxes are symmetric under a half turn; fold yaw into (-pi/2, pi/2]."""
    y = normalize_angle(theta)
    if y > math.pi / 2.0:
        y -= math.pi
    elif y <= -math.pi / 2.0:
        y += math.pi
    return y


def classify_footprint(length: float, width: float, table=DEFAULT_CLASS_TABLE) -> str:
    long_side, short_side = max(length, width), min(length, width)
    for label, max_len, max_width in table:
        if long_side <= max_len and short_side <= max_width:
            return label
    return "unknown"


def fit_box(points: np.ndarray, table=DEFAULT_CLASS_TABLE) -> OrientedBox:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cx, cy, hl, hw, yaw = min_area_rectangle(pts[:, :2])
    z0, z1 = float(pts[:, 2].min()), float(pts[:, 2].max())
    hl, hw = max(hl, MIN_HALF_EXTENT), max(hw, MIN_HALF_EXTENT)
    hz = max((z1 - z0) / 2.0, MIN_HALF_EXTENT)
    label = classify_footprint(2 * hl, 2 * hw, table)
    return OrientedBox(Vec3(cx, cy, (z0 + z1) / 2.0), Vec3(hl, hw, hz), yaw, label)


def detect(cloud: PointCloud, config: DetectorConfig | None = None) -> list[Detection]:
    """Cluster a metric-frame cloud and fit one labelled box per cluster.

    Output is sorted by descending point count; ties by box center.
    """
    config = config or DetectorConfig()
    if cloud.frame == FRAME_SENSOR:
        raise ValueError("detect needs a vehicle-body or world frame cloud")
    if len(cloud) == 0:
        return []
    labels = cluster_xy(cloud.points, config.cluster_radius)
    detections = []
    for lab in np.unique(labels):
        members = cloud.points[labels == lab]
        if len(members) < config.min_cluster_size:
            continue
        box = fit_box(members, config.class_table)
        detections.append(
            Detection(box, cloud.source, cloud.timestamp, int(len(members)), cloud.frame)
        )
    detections.sort(key=lambda d: (-d.point_count, tuple(d.box.center)))
    return detections
