"""Greedy nearest-neighbour multi-object tracking with exponential-smoothing motion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .detection import Detection
from .geometry import OrientedBox, Pose, Vec3, vec3

LITERAL = "literal"
CLASSICAL = "classical"


class UnpredictableTrackError(ValueError):
    """The track has too little history to extrapolate."""


def smooth_update(s_n: Sequence[float], s_prev: Sequence[float], t: float) -> Vec3:
    """``t * s_n + (1 - t) * s_prev`` componentwise."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"smoothing factor must be in [0, 1], got {t}")
    a, b = vec3(s_n), vec3(s_prev)
    if t == 1.0:
        return a
    if t == 0.0:
        return b
    return Vec3(t * a.x + (1 - t) * b.x, t * a.y + (1 - t) * b.y, t * a.z + (1 - t) * b.z)


@dataclass(frozen=True)
class TrackerConfig:
    """Association gate, smoothing weight and track lifecycle counts.

    ``smoothing_mode`` selects how the velocity estimate is refreshed:
    ``literal`` blends the two most recent frame-to-frame velocities,
    ``classical`` blends the newest one with the previous estimate.
    """

    gate_distance: float = 3.0
    smoothing: float = 0.7
    max_misses: int = 3
    min_hits: int = 2
    smoothing_mode: str = LITERAL

    def __post_init__(self) -> None:
        if self.gate_distance <= 0:
            raise ValueError("gate_distance must be positive")
        if not 0.0 <= self.smoothing <= 1.0:
            raise ValueError("smoothing must be in [0, 1]")
        if self.max_misses < 1 or self.min_hits < 1:
            raise ValueError("max_misses and min_hits must be >= 1")
        if self.smoothing_mode not in (LITERAL, CLASSICAL):
            raise ValueError(f"unknown smoothing mode {self.smoothing_mode!r}")


@dataclass
class Track:
    id: int
    class_label: str
    history: list[tuple[int, OrientedBox]] = field(default_factory=list)
    velocity: Vec3 = Vec3(0.0, 0.0, 0.0)
    last_instant_velocity: Vec3 | None = None
    misses: int = 0
    hits: int = 0

    @property
    def last_timestamp(self) -> int:
        return self.history[-1][0]

    @property
    def last_box(self) -> OrientedBox:
        return self.history[-1][1]

    def confirmed(self, min_hits: int) -> bool:
        return self.hits >= min_hits

    def predicted_center(self, timestamp: int) -> Vec3:
        dt = (timestamp - self.last_timestamp) / 1e6
        c, v = self.last_box.center, self.velocity
        return Vec3(c.x + v.x * dt, c.y + v.y * dt, c.z)

    def trajectory(self) -> list[tuple[int, Vec3]]:
        return [(ts, box.center) for ts, box in sorted(self.history, key=lambda h: h[0])]


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]  # (track index, detection index)
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]


def associate(
    tracks: Sequence[Track], detections: Sequence[Detection], config: TrackerConfig, timestamp: int
) -> Matching:
    """Greedy same-class matching on predicted-center distance inside the gate.

    Candidate pairs are taken shortest first; exact ties go to the lower
    track id, then the lower detection index.
    """
    candidates = []
    for ti, trk in enumerate(tracks):
        pred = trk.predicted_center(timestamp)
        for di, det in enumerate(detections):
            if det.box.class_label != trk.class_label:
                continue
            c = det.box.center
            dist = math.hypot(c.x - pred.x, c.y - pred.y)
            if dist <= config.gate_distance:
                candidates.append((dist, trk.id, di, ti))
    candidates.sort()
    used_t: set[int] = set()
    used_d: set[int] = set()
    pairs = []
    for _, _, di, ti in candidates:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        pairs.append((ti, di))
    return Matching(
        tuple(sorted(pairs)),
        tuple(i for i in range(len(tracks)) if i not in used_t),
        tuple(i for i in range(len(detections)) if i not in used_d),
    )


def predict(track: Track, horizon: float) -> Pose:
    """Extrapolate the last observed center by ``velocity * horizon`` seconds."""
    if len(track.history) < 2:
        raise UnpredictableTrackError(f"track {track.id} has {len(track.history)} observation(s)")
    box = track.last_box
    v = track.velocity
    return Pose(
        Vec3(box.center.x + v.x * horizon, box.center.y + v.y * horizon, box.center.z), box.yaw
    )


class Tracker:
    """Sequential tracker; feed it one fused frame of detections per tick, in order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_timestamp: int | None = None

    def _spawn(self, det: Detection, timestamp: int) -> Track:
        trk = Track(self._next_id, det.box.class_label, [(timestamp, det.box)], hits=1)
        self._next_id += 1
        return trk

    def _observe(self, trk: Track, det: Detection, timestamp: int) -> None:
        prev_ts, prev_box = trk.history[-1]
        dt = (timestamp - prev_ts) / 1e6
        c0, c1 = prev_box.center, det.box.center
        inst = Vec3((c1.x - c0.x) / dt, (c1.y - c0.y) / dt, 0.0)
        t = self.config.smoothing
        if trk.last_instant_velocity is None:
            trk.velocity = inst
        elif self.config.smoothing_mode == LITERAL:
            trk.velocity = smooth_update(inst, trk.last_instant_velocity, t)
        else:
            trk.velocity = smooth_update(inst, trk.velocity, t)
        trk.last_instant_velocity = inst
        trk.history.append((timestamp, det.box))
        trk.hits += 1
        trk.misses = 0

    def update(self, detections: Sequence[Detection], timestamp: int) -> list[Track]:
        """Associate, update, spawn and retire; return confirmed tracks seen this tick."""
        if self._last_timestamp is not None and timestamp <= self._last_timestamp:
            raise ValueError("frames must arrive in strictly increasing timestamp order")
        self._last_timestamp = timestamp
        m = associate(self.tracks, detections, self.config, timestamp)
        seen = []
        for ti, di in m.pairs:
            trk = self.tracks[ti]
            self._observe(trk, detections[di], timestamp)
            seen.append(trk)
        for ti in m.unmatched_tracks:
            self.tracks[ti].misses += 1
        survivors = [t for t in self.tracks if t.misses < self.config.max_misses]
        for di in m.unmatched_detections:
            trk = self._spawn(detections[di], timestamp)
            survivors.append(trk)
            seen.append(trk)
        self.tracks = survivors
        return sorted(
            (t for t in seen if t.confirmed(self.config.min_hits)), key=lambda t: t.id
        )

    def confirmed_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.confirmed(self.config.min_hits)]
