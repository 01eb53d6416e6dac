import math

import pytest
from hypothesis import given, strategies as st

from coopsense.geometry import OrientedBox, Vec3
from coopsense.world import Actor, Trajectory, Waypoint, World, WorldClock


def car(actor_id=1, traj=None):
    shape = OrientedBox(Vec3(0, 0, 0.75), Vec3(2.25, 0.9, 0.75))
    return Actor(actor_id, "car", shape, traj or Trajectory.constant_velocity(0, 0, 10, 0, 5))


def test_constant_velocity_interpolation():
    world = World([car()])
    snap = world.snapshot_at(1_500_000)
    assert snap.pose(1).position.x == pytest.approx(15.0)
    assert snap.box(1).class_label == "vehicle"
    assert snap.box(1).center.z == pytest.approx(0.75)


def test_trajectory_holds_end_poses():
    traj = Trajectory.constant_velocity(0, 0, 1, 0, 2)
    assert traj.pose_at(-10).position.x == 0.0
    assert traj.pose_at(10_000_000).position.x == pytest.approx(2.0)


def test_yaw_interpolates_the_short_way():
    traj = Trajectory((Waypoint(0, 0, 0, math.radians(170)), Waypoint(1000, 0, 0, math.radians(-170))))
    assert abs(math.degrees(traj.pose_at(500).yaw)) == pytest.approx(180.0)


def test_trajectory_requires_increasing_time():
    with pytest.raises(ValueError):
        Trajectory((Waypoint(5, 0, 0, 0), Waypoint(5, 1, 0, 0)))


@given(steps=st.lists(st.integers(1, 10**6), min_size=1, max_size=30))
def test_clock_is_monotone(steps):
    clock = WorldClock()
    last = clock.current
    for dt in steps:
        now = clock.advance(dt)
        assert now > last
        last = now


def test_clock_rejects_non_positive_step():
    with pytest.raises(ValueError):
        WorldClock().advance(0)


def test_world_step_advances_one_tick():
    world = World([car()])
    assert world.step().timestamp == 100_000
    assert world.step().pose(1).position.x == pytest.approx(2.0)


def test_unique_ids_and_kinds():
    with pytest.raises(ValueError):
        World([car(1), car(1)])
    with pytest.raises(ValueError):
        Actor(1, "truck", OrientedBox(Vec3(0, 0, 1), Vec3(1, 1, 1)), Trajectory.stationary(0, 0))


def test_snapshot_filters():
    world = World([car(1), car(2, Trajectory.stationary(10, 0))])
    snap = world.snapshot_at(0)
    assert [s.actor_id for s in snap.without([1]).states] == [2]
    assert snap.only(["static_obstacle"]).states == ()
