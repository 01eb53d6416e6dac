import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from coopsense.geometry import OrientedBox, Pose, Vec3
from coopsense.sensors import (
    GnssPair,
    LidarConfig,
    beam_ranges,
    capture_background,
    estimate_vehicle_pose,
    fuse_gnss,
    ray_box_distances,
    read_gnss,
    scan_lidar,
)
from coopsense.world import Actor, Trajectory, World

coord = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


@settings(max_examples=1000, deadline=None)
@given(x1=coord, y1=coord, x2=coord, y2=coord)
def test_fuse_gnss_matches_midpoint_atan2_oracle(x1, y1, x2, y2):
    assume(math.hypot(x2 - x1, y2 - y1) > 1e-3)
    pose = fuse_gnss((x1, y1), (x2, y2))
    assert pose.position.x == pytest.approx((x1 + x2) / 2, abs=1e-9)
    assert pose.position.y == pytest.approx((y1 + y2) / 2, abs=1e-9)
    expected = math.atan2(y2 - y1, x2 - x1)
    assert math.cos(pose.yaw) == pytest.approx(math.cos(expected), abs=1e-12)
    assert math.sin(pose.yaw) == pytest.approx(math.sin(expected), abs=1e-12)


@pytest.mark.parametrize(
    "front, expected_deg",
    [((1, 0), 0), ((0, 1), 90), ((-1, 0), 180), ((0, -1), -90), ((1, 1), 45), ((-1, -1), -135)],
)
def test_fuse_gnss_quadrants(front, expected_deg):
    assert math.degrees(fuse_gnss((0, 0), front).yaw) == pytest.approx(expected_deg)


def test_fuse_gnss_rejects_coincident():
    with pytest.raises(ValueError):
        fuse_gnss((1.0, 1.0), (1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(x=coord, y=coord, a=st.floats(-math.pi, math.pi))
def test_gnss_round_trip_with_offset_antennas(x, y, a):
    pair = GnssPair(front=(2.0, 0.3), rear=(-1.0, 0.3))
    pose = Pose(Vec3(x, y, 0.0), a)
    est = estimate_vehicle_pose(pair, read_gnss(pair, pose))
    assert est.position.x == pytest.approx(x, abs=1e-8)
    assert est.position.y == pytest.approx(y, abs=1e-8)
    assert math.cos(est.yaw - pose.yaw) == pytest.approx(1.0, abs=1e-12)


def test_gnss_noise_is_seeded():
    pair = GnssPair(noise_sigma=0.05, seed=3)
    pose = Pose(Vec3(1.0, 2.0, 0.0), 0.3)
    assert read_gnss(pair, pose, 100) == read_gnss(pair, pose, 100)
    assert read_gnss(pair, pose, 100) != read_gnss(pair, pose, 200)


def test_ray_box_distance_frontal_hit():
    box = OrientedBox(Vec3(10.0, 0.0, 1.0), Vec3(1.0, 1.0, 1.0))
    dirs = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    d = ray_box_distances(np.array([0.0, 0.0, 1.0]), dirs, box)
    assert d[0] == pytest.approx(9.0)
    assert np.isinf(d[1]) and np.isinf(d[2])


def _world(*boxes):
    actors = [
        Actor(i + 1, "static_obstacle", OrientedBox(Vec3(0, 0, h.z), h), Trajectory.stationary(x, y))
        for i, (x, y, h) in enumerate(boxes)
    ]
    return World(actors)


def test_scan_returns_points_on_box_surface():
    cfg = LidarConfig(mount=Vec3(0, 0, 0), max_range=20.0, noise_sigma=0.0)
    world = _world((8.0, 0.0, Vec3(1.0, 2.0, 1.5)))
    cloud = scan_lidar(cfg, Pose(Vec3(0, 0, 1.0), 0.0), world.snapshot_at(0))
    assert len(cloud) > 0
    np.testing.assert_allclose(cloud.points[:, 0], 7.0, atol=1e-9)


def test_scan_nearest_box_occludes_farther():
    cfg = LidarConfig(mount=Vec3(0, 0, 0), max_range=30.0, noise_sigma=0.0)
    world = _world((5.0, 0.0, Vec3(0.5, 3.0, 3.0)), (12.0, 0.0, Vec3(0.5, 1.0, 3.0)))
    cloud = scan_lidar(cfg, Pose(Vec3(0, 0, 1.0), 0.0), world.snapshot_at(0))
    assert cloud.points[:, 0].max() < 5.0


def test_scan_respects_range_and_exclusion():
    cfg = LidarConfig(mount=Vec3(0, 0, 0), max_range=20.0, noise_sigma=0.0)
    world = _world((25.0, 0.0, Vec3(1.0, 1.0, 1.0)), (5.0, 0.0, Vec3(1.0, 1.0, 1.0)))
    snap = world.snapshot_at(0)
    cloud = scan_lidar(cfg, Pose(Vec3(0, 0, 1.0), 0.0), snap)
    assert np.linalg.norm(cloud.points, axis=1).max() <= 20.0
    assert len(scan_lidar(cfg, Pose(Vec3(0, 0, 1.0), 0.0), snap, exclude=(2,))) == 0


def test_noise_is_bounded_and_deterministic():
    cfg = LidarConfig(mount=Vec3(0, 0, 0), max_range=20.0, noise_sigma=0.01, seed=9)
    world = _world((8.0, 0.0, Vec3(1.0, 2.0, 1.5)))
    pose = Pose(Vec3(0, 0, 1.0), 0.0)
    a = scan_lidar(cfg, pose, world.snapshot_at(0))
    b = scan_lidar(cfg, pose, world.snapshot_at(0))
    assert a == b
    ranges = beam_ranges(a)[a.beam_index]
    clean = beam_ranges(scan_lidar(LidarConfig(mount=Vec3(0, 0, 0), max_range=20.0, noise_sigma=0.0), pose, world.snapshot_at(0)))
    assert np.all(np.abs(ranges - clean[a.beam_index]) <= 0.04 + 1e-12)


def test_beam_grid_defaults():
    cfg = LidarConfig(mount=Vec3(0, 0, 2.0), max_range=20.0)
    assert cfg.beam_grid == (900, 16)
    el = np.degrees(cfg.elevations())
    assert el.min() == pytest.approx(-15.0) and el.max() == pytest.approx(15.0)


def test_background_rejects_movers():
    cfg = LidarConfig(mount=Vec3(0, 0, 0), max_range=20.0)
    car = Actor(1, "car", OrientedBox(Vec3(0, 0, 0.75), Vec3(2, 1, 0.75)), Trajectory.stationary(5, 0))
    with pytest.raises(ValueError):
        capture_background(cfg, Pose(), World([car]).snapshot_at(0))
