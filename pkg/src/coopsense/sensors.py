"""Ray-cast lidar and dual-antenna GNSS models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    FRAME_SENSOR,
    PointCloud,
    Pose,
    Vec3,
    rotate_z,
    rotate_z_points,
    vec3,
    vehicle_to_world,
)
from .world import Snapshot

# Independent stream ids so sensors sharing a seed do not share noise.
_LIDAR_STREAM = 0x11DA
_GNSS_STREAM = 0x6A55


@dataclass(frozen=True)
class LidarConfig:
    """Beam-grid lidar.

    ``mount`` is the offset from the vehicle body origin for a vehicle lidar
    or the world pose of a roadside lidar. Beam ``k`` has azimuth index
    ``k // channels`` and elevation index ``k % channels``.
    """

    mount: Vec3 | Pose = Vec3(0.0, 0.0, 2.0)
    max_range: float = 20.0
    horizontal_resolution: float = math.radians(0.4)
    channels: int = 16
    elevation_span: tuple[float, float] = (math.radians(-15.0), math.radians(15.0))
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.horizontal_resolution <= 0:
            raise ValueError("horizontal_resolution must be positive")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        lo, hi = self.elevation_span
        if hi < lo:
            raise ValueError("elevation_span must be (low, high)")

    @property
    def n_azimuths(self) -> int:
        return max(1, int(round(2.0 * math.pi / self.horizontal_resolution)))

    @property
    def beam_grid(self) -> tuple[int, int]:
        return (self.n_azimuths, self.channels)

    @property
    def n_beams(self) -> int:
        return self.n_azimuths * self.channels

    def azimuths(self) -> np.ndarray:
        return np.arange(self.n_azimuths) * (2.0 * math.pi / self.n_azimuths)

    def elevations(self) -> np.ndarray:
        lo, hi = self.elevation_span
        if self.channels == 1:
            return np.array([(lo + hi) / 2.0])
        return np.linspace(lo, hi, self.channels)

    def beam_directions(self) -> np.ndarray:
        """Unit directions (n_beams, 3) in the sensor frame."""
        az = self.azimuths()[:, None]
        el = self.elevations()[None, :]
        d = np.stack(
            np.broadcast_arrays(np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)),
            axis=-1,
        )
        return d.reshape(-1, 3)


def vehicle_sensor_pose(vehicle_pose: Pose, mount: Sequence[float]) -> Pose:
    """World pose of a lidar rigidly mounted at ``mount`` on the vehicle body."""
    return Pose(vehicle_to_world((0.0, 0.0, 0.0), mount, vehicle_pose), vehicle_pose.yaw)


def ray_box_distances(origin: np.ndarray, dirs: np.ndarray, box) -> np.ndarray:
    """Entry distance of each ray into ``box`` (inf on miss or if origin is inside)."""
    c = np.asarray(box.center)
    e = np.asarray(box.extent)
    o = rotate_z(origin - c, -box.yaw)
    o = np.asarray(o)
    d = rotate_z_points(dirs, -box.yaw)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-e - o) * inv
        t2 = (e - o) * inv
    tlo = np.minimum(t1, t2)
    thi = np.maximum(t1, t2)
    parallel = d == 0.0
    inside_slab = np.abs(o) <= e
    tlo = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), tlo)
    thi = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), thi)
    tmin = tlo.max(axis=1)
    tmax = thi.min(axis=1)
    hit = (tmax >= tmin) & (tmin > 0.0)
    return np.where(hit, tmin, np.inf)


def _range_noise(config: LidarConfig, timestamp: int) -> np.ndarray:
    if config.noise_sigma == 0.0:
        return np.zeros(config.n_beams)
    rng = np.random.default_rng([config.seed, _LIDAR_STREAM, timestamp])
    # truncated at 4 sigma so returned ranges stay within max_range + 4 sigma
    return np.clip(rng.standard_normal(config.n_beams), -4.0, 4.0) * config.noise_sigma


def scan_lidar(
    config: LidarConfig,
    sensor_pose: Pose,
    snapshot: Snapshot,
    source: str = "",
    exclude: Iterable[int] = (),
) -> PointCloud:
    """Cast every beam against every actor box and keep the nearest hit.

    Points are returned in the sensor frame. ``exclude`` lists actor ids the
    sensor cannot see (its own carrier vehicle).
    """
    dirs_local = config.beam_directions()
    dirs_world = rotate_z_points(dirs_local, sensor_pose.yaw)
    origin = np.asarray(sensor_pose.position)
    skip = set(exclude)
    nearest = np.full(config.n_beams, np.inf)
    for st in snapshot.states:
        if st.actor_id in skip:
            continue
        # bounding-sphere cull: nothing on this box can be in range
        if np.linalg.norm(np.asarray(st.box.center) - origin) - np.linalg.norm(st.box.extent) > config.max_range:
            continue
        nearest = np.minimum(nearest, ray_box_distances(origin, dirs_world, st.box))
    hit = nearest <= config.max_range
    ranges = nearest + _range_noise(config, snapshot.timestamp)
    idx = np.flatnonzero(hit)
    points = dirs_local[idx] * ranges[idx, None]
    return PointCloud(
        points,
        frame=FRAME_SENSOR,
        timestamp=snapshot.timestamp,
        source=source,
        beam_index=idx,
        beam_grid=config.beam_grid,
    )


def capture_background(
    config: LidarConfig, sensor_pose: Pose, snapshot: Snapshot, source: str = ""
) -> PointCloud:
    """Reference scan of a fixed sensor over a scene of static obstacles only."""
    movers = [s.actor_id for s in snapshot.states if s.kind != "static_obstacle"]
    if movers:
        raise ValueError(f"background snapshot contains non-static actors {movers}")
    return scan_lidar(config, sensor_pose, snapshot, source=source)


def beam_ranges(cloud: PointCloud) -> np.ndarray:
    """Per-beam range array of a sensor-frame scan; ``inf`` where no return."""
    if cloud.beam_index is None or cloud.beam_grid is None:
        raise ValueError("cloud carries no beam indices")
    n_az, n_ch = cloud.beam_grid
    out = np.full(n_az * n_ch, np.inf)
    out[cloud.beam_index] = np.linalg.norm(cloud.points, axis=1)
    return out


@dataclass(frozen=True)
class GnssPair:
    """Front and rear antennas in the vehicle body frame."""

    front: tuple[float, float] = (1.5, 0.0)
    rear: tuple[float, float] = (-1.5, 0.0)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if math.dist(self.front, self.rear) < 1e-6:
            raise ValueError("GNSS antennas must be at distinct body-frame locations")


@dataclass(frozen=True, slots=True)
class GnssReading:
    rear: tuple[float, float]
    front: tuple[float, float]
    timestamp: int = 0


def read_gnss(pair: GnssPair, vehicle_pose: Pose, timestamp: int = 0) -> GnssReading:
    """Simulated world-frame antenna fixes with seeded Gaussian noise."""
    noise = np.zeros(4)
    if pair.noise_sigma > 0.0:
        rng = np.random.default_rng([pair.seed, _GNSS_STREAM, timestamp])
        noise = rng.standard_normal(4) * pair.noise_sigma
    px, py = vehicle_pose.position.x, vehicle_pose.position.y
    rx, ry, _ = rotate_z((pair.rear[0], pair.rear[1], 0.0), vehicle_pose.yaw)
    fx, fy, _ = rotate_z((pair.front[0], pair.front[1], 0.0), vehicle_pose.yaw)
    return GnssReading(
        rear=(px + rx + noise[0], py + ry + noise[1]),
        front=(px + fx + noise[2], py + fy + noise[3]),
        timestamp=timestamp,
    )


def fuse_gnss(rear: Sequence[float], front: Sequence[float]) -> Pose:
    """Vehicle position and yaw from the rear ``(x1, y1)`` and front ``(x2, y2)`` fixes.

    Position is the antenna midpoint; yaw is the heading of the rear-to-front
    baseline, using ``atan2`` so every quadrant (and ``x2 == x1``) is handled.
    """
    x1, y1 = float(rear[0]), float(rear[1])
    x2, y2 = float(front[0]), float(front[1])
    if not all(math.isfinite(v) for v in (x1, y1, x2, y2)):
        raise ValueError("GNSS readings must be finite")
    if math.hypot(x2 - x1, y2 - y1) < 1e-6:
        raise ValueError("GNSS antennas coincide; yaw is undefined")
    return Pose(Vec3(x1 / 2 + x2 / 2, y1 / 2 + y2 / 2, 0.0), math.atan2(y2 - y1, x2 - x1))


def estimate_vehicle_pose(pair: GnssPair, reading: GnssReading) -> Pose:
    """Body-origin pose from a reading, correcting for antenna lever arms.

    Equals :func:`fuse_gnss` when the antennas sit symmetrically on the
    body x axis.
    """
    raw = fuse_gnss(reading.rear, reading.front)
    baseline_yaw = math.atan2(pair.front[1] - pair.rear[1], pair.front[0] - pair.rear[0])
    yaw = raw.yaw - baseline_yaw
    mid_body = vec3(((pair.front[0] + pair.rear[0]) / 2, (pair.front[1] + pair.rear[1]) / 2, 0.0))
    offset = rotate_z(mid_body, yaw)
    return Pose(raw.position - offset, yaw)
