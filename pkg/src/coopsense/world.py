"""Deterministic scenario world: actors on scripted piecewise-linear trajectories."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import OrientedBox, Pose, Vec3, angle_diff, normalize_angle

ACTOR_KINDS = ("car", "pedestrian", "bicycle", "static_obstacle")

KIND_TO_CLASS = {
    "car": "vehicle",
    "pedestrian": "pedestrian",
    "bicycle": "bicycle",
    "static_obstacle": "unknown",
}

US_PER_S = 1_000_000


@dataclass(frozen=True, slots=True)
class Waypoint:
    t_us: int
    x: float
    y: float
    yaw: float
    z: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """Position/yaw samples, linearly interpolated between timestamps.

    Outside the sampled interval the actor holds the first or final pose.
    """

    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        wps = tuple(self.waypoints)
        if not wps:
            raise ValueError("trajectory needs at least one waypoint")
        for a, b in zip(wps, wps[1:]):
            if b.t_us <= a.t_us:
                raise ValueError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "_times", [w.t_us for w in wps])

    @classmethod
    def stationary(cls, x: float, y: float, yaw: float = 0.0) -> "Trajectory":
        return cls((Waypoint(0, x, y, yaw),))

    @classmethod
    def constant_velocity(
        cls, x: float, y: float, vx: float, vy: float, duration_s: float, yaw: float | None = None
    ) -> "Trajectory":
        heading = math.atan2(vy, vx) if yaw is None else yaw
        end = int(round(duration_s * US_PER_S))
        return cls(
            (
                Waypoint(0, x, y, heading),
                Waypoint(end, x + vx * duration_s, y + vy * duration_s, heading),
            )
        )

    @property
    def end_us(self) -> int:
        return self.waypoints[-1].t_us

    def pose_at(self, t_us: int) -> Pose:
        wps = self.waypoints
        times = self._times  # type: ignore[attr-defined]
        if t_us <= times[0]:
            w = wps[0]
            return Pose(Vec3(w.x, w.y, w.z), w.yaw)
        if t_us >= times[-1]:
            w = wps[-1]
            return Pose(Vec3(w.x, w.y, w.z), w.yaw)
        i = bisect.bisect_right(times, t_us) - 1
        a, b = wps[i], wps[i + 1]
        u = (t_us - a.t_us) / (b.t_us - a.t_us)
        yaw = normalize_angle(a.yaw + u * angle_diff(b.yaw, a.yaw))
        return Pose(
            Vec3(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z)),
            yaw,
        )


@dataclass(frozen=True)
class Actor:
    """A scripted scene participant.

    ``shape`` is the actor's box in its own body frame; the body origin sits
    on the ground, so a car's shape is usually centered at ``z = height/2``.
    """

    id: int
    kind: str
    shape: OrientedBox
    trajectory: Trajectory

    def __post_init__(self) -> None:
        if self.kind not in ACTOR_KINDS:
            raise ValueError(f"unknown actor kind {self.kind!r}")

    @property
    def class_label(self) -> str:
        return KIND_TO_CLASS[self.kind]

    def box_at(self, pose: Pose) -> OrientedBox:
        return self.shape.transformed(pose).with_label(self.class_label)


@dataclass(frozen=True, slots=True)
class ActorState:
    actor_id: int
    kind: str
    pose: Pose
    box: OrientedBox


@dataclass(frozen=True)
class Snapshot:
    """Immutable view of every actor at one clock reading."""

    timestamp: int
    states: tuple[ActorState, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {s.actor_id: s for s in self.states})

    def state(self, actor_id: int) -> ActorState:
        return self._by_id[actor_id]  # type: ignore[attr-defined]

    def box(self, actor_id: int) -> OrientedBox:
        return self.state(actor_id).box

    def pose(self, actor_id: int) -> Pose:
        return self.state(actor_id).pose

    def only(self, kinds: Iterable[str]) -> "Snapshot":
        kinds = set(kinds)
        return Snapshot(self.timestamp, tuple(s for s in self.states if s.kind in kinds))

    def without(self, actor_ids: Iterable[int]) -> "Snapshot":
        drop = set(actor_ids)
        return Snapshot(self.timestamp, tuple(s for s in self.states if s.actor_id not in drop))


@dataclass
class WorldClock:
    """Shared simulated timebase in microseconds."""

    tick_period: int = 100_000
    current: int = 0

    def __post_init__(self) -> None:
        if self.tick_period <= 0:
            raise ValueError("tick_period must be positive")

    @property
    def tick(self) -> int:
        return self.current // self.tick_period

    def advance(self, dt: int) -> int:
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.current += int(dt)
        return self.current


@dataclass
class World:
    actors: Sequence[Actor]
    clock: WorldClock = field(default_factory=WorldClock)

    def __post_init__(self) -> None:
        self.actors = tuple(self.actors)
        ids = [a.id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ValueError("actor ids must be unique")
        self._by_id = {a.id: a for a in self.actors}

    def actor(self, actor_id: int) -> Actor:
        return self._by_id[actor_id]

    def snapshot_at(self, t_us: int) -> Snapshot:
        states = []
        for a in self.actors:
            pose = a.trajectory.pose_at(t_us)
            states.append(ActorState(a.id, a.kind, pose, a.box_at(pose)))
        return Snapshot(int(t_us), tuple(states))

    def snapshot(self) -> Snapshot:
        return self.snapshot_at(self.clock.current)

    def step(self, dt: int | None = None) -> Snapshot:
        self.clock.advance(self.clock.tick_period if dt is None else dt)
        return self.snapshot()


def step(world: World, dt: int) -> Snapshot:
    """Advance ``world`` by ``dt`` microseconds and return the new snapshot."""
    return world.step(dt)
