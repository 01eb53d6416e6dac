"""Scenario files: YAML documents describing actors, sensors and run settings.

Units in files: meters, seconds, degrees (converted to microseconds and
radians on load). Unknown fields are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..detection import DetectorConfig
from ..fusion import FEATURE, PIXEL, ROADSIDE, SensorRegistration
from ..geometry import OrientedBox, Pose, Vec3
from ..sensors import GnssPair, LidarConfig
from ..tracking import TrackerConfig
from ..world import US_PER_S, Actor, Trajectory, Waypoint, World, WorldClock

SCENARIO_NAMES = ("curve_range", "blind_area", "accuracy")
MODES = ("solo", "coop")
FUSION_MODES = (FEATURE, PIXEL)


class ScenarioError(ValueError):
    """Invalid scenario file or run settings."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StraightSegment(_Strict):
    straight: float = Field(gt=0, description="length, m")
    speed_mps: Optional[float] = Field(None, gt=0, description="overrides the route speed")


class TurnSegment(_Strict):
    turn_deg: float = Field(description="heading change, + = left")
    radius: float = Field(gt=0, description="m")
    speed_mps: Optional[float] = Field(None, gt=0, description="overrides the route speed")


class Route(_Strict):
    """Constant-speed path built from straight and circular-arc segments."""

    start: tuple[float, float]
    heading_deg: float
    speed_mps: float = Field(gt=0)
    start_s: float = Field(0.0, ge=0)
    segments: list[Union[StraightSegment, TurnSegment]]
    arc_step_deg: float = Field(3.0, gt=0)


class ActorModel(_Strict):
    id: int
    kind: Literal["car", "pedestrian", "bicycle", "static_obstacle"]
    size: tuple[float, float, float] = Field(description="length, width, height in m")
    waypoints: Optional[list[tuple[float, float, float, float]]] = Field(
        None, description="[t_s, x_m, y_m, yaw_deg] samples"
    )
    route: Optional[Route] = None
    note: str = ""

    @model_validator(mode="after")
    def _one_motion(self):
        if (self.waypoints is None) == (self.route is None):
            raise ValueError(f"actor {self.id}: give exactly one of waypoints or route")
        if min(self.size) <= 0:
            raise ValueError(f"actor {self.id}: sizes must be positive")
        return self


class LidarModel(_Strict):
    max_range_m: float = Field(gt=0)
    horizontal_resolution_deg: float = Field(0.4, gt=0)
    channels: int = Field(16, ge=1)
    elevation_deg: tuple[float, float] = (-15.0, 15.0)
    noise_sigma_m: float = Field(0.01, ge=0)


class VehicleLidarModel(LidarModel):
    mount: tuple[float, float, float] = (0.0, 0.0, 2.0)


class RoadsideModel(_Strict):
    id: str
    sender_id: int = Field(ge=0, lt=2**32)
    position: tuple[float, float, float]
    yaw_deg: float = 0.0
    lidar: LidarModel
    cadence: int = Field(1, ge=1)


class GnssModel(_Strict):
    front: tuple[float, float] = (1.5, 0.0)
    rear: tuple[float, float] = (-1.5, 0.0)
    noise_sigma_m: float = Field(0.0, ge=0)


class DetectorModel(_Strict):
    cluster_radius_m: float = Field(0.7, gt=0)
    min_cluster_size: int = Field(5, ge=3)
    background_tolerance_m: float = Field(0.15, ge=0)


class TrackerModel(_Strict):
    gate_distance_m: float = Field(3.0, gt=0)
    smoothing: float = Field(0.7, ge=0, le=1)
    max_misses: int = Field(3, ge=1)
    min_hits: int = Field(2, ge=1)
    smoothing_mode: Literal["literal", "classical"] = "literal"


class FusionModel(_Strict):
    iou_threshold: float = Field(0.3, ge=0)


class ScenarioFile(_Strict):
    name: str
    description: str = ""
    seed: int = 0
    tick_period_s: float = Field(0.1, gt=0)
    duration_ticks: int = Field(gt=0)
    ego_id: int
    target_id: int
    blocker_id: Optional[int] = None
    evaluate_overlap: bool = False
    actors: list[ActorModel]
    vehicle_lidar: VehicleLidarModel
    gnss: GnssModel = GnssModel()
    roadside: list[RoadsideModel] = []
    detector: DetectorModel = DetectorModel()
    tracker: TrackerModel = TrackerModel()
    fusion: FusionModel = FusionModel()

    @model_validator(mode="after")
    def _ids_exist(self):
        ids = [a.id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ValueError("actor ids must be unique")
        for label in ("ego_id", "target_id", "blocker_id"):
            value = getattr(self, label)
            if value is not None and value not in ids:
                raise ValueError(f"{label} {value} does not name an actor")
        if self.ego_id == self.target_id:
            raise ValueError("ego and target must differ")
        return self


def route_waypoints(route: Route) -> list[Waypoint]:
    """Expand a route into timed waypoints (arcs sampled every ``arc_step_deg``)."""
    x, y = route.start
    heading = math.radians(route.heading_deg)
    t = route.start_s

    def wp(t_, x_, y_, h_):
        return Waypoint(int(round(t_ * US_PER_S)), x_, y_, h_)

    out = [wp(t, x, y, heading)]
    for seg in route.segments:
        speed = seg.speed_mps or route.speed_mps
        if isinstance(seg, StraightSegment):
            x += seg.straight * math.cos(heading)
            y += seg.straight * math.sin(heading)
            t += seg.straight / speed
            out.append(wp(t, x, y, heading))
            continue
        sweep = math.radians(seg.turn_deg)
        side = 1.0 if sweep > 0 else -1.0
        cx = x - side * seg.radius * math.sin(heading)
        cy = y + side * seg.radius * math.cos(heading)
        n = max(1, int(math.ceil(abs(seg.turn_deg) / route.arc_step_deg)))
        h0 = heading
        dt = seg.radius * abs(sweep) / n / speed
        for i in range(1, n + 1):
            h = h0 + sweep * i / n
            px = cx + side * seg.radius * math.sin(h)
            py = cy - side * seg.radius * math.cos(h)
            out.append(wp(t + dt * i, px, py, h))
        t += dt * n
        heading = h0 + sweep
        x, y = out[-1].x, out[-1].y
    return out


def _actor(model: ActorModel) -> Actor:
    length, width, height = model.size
    shape = OrientedBox(Vec3(0.0, 0.0, height / 2.0), Vec3(length / 2, width / 2, height / 2))
    if model.route is not None:
        wps = route_waypoints(model.route)
    else:
        wps = [
            Waypoint(int(round(t * US_PER_S)), x, y, math.radians(yaw))
            for t, x, y, yaw in model.waypoints
        ]
    return Actor(model.id, model.kind, shape, Trajectory(tuple(wps)))


def lidar_config(model: LidarModel, mount, seed: int) -> LidarConfig:
    lo, hi = model.elevation_deg
    return LidarConfig(
        mount=mount,
        max_range=model.max_range_m,
        horizontal_resolution=math.radians(model.horizontal_resolution_deg),
        channels=model.channels,
        elevation_span=(math.radians(lo), math.radians(hi)),
        noise_sigma=model.noise_sigma_m,
        seed=seed,
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """A scenario file plus the run choices made on the command line."""

    scenario: ScenarioFile
    mode: str = "coop"
    fusion_mode: str = FEATURE
    seed: int | None = None
    duration_ticks: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fusion_mode not in FUSION_MODES:
            raise ScenarioError(f"fusion must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if self.duration_ticks is not None and self.duration_ticks <= 0:
            raise ScenarioError("duration must be positive")
        if self.mode == "coop" and not self.scenario.roadside:
            raise ScenarioError("coop mode needs at least one roadside sensor")

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def effective_seed(self) -> int:
        return self.scenario.seed if self.seed is None else self.seed

    @property
    def ticks(self) -> int:
        return self.duration_ticks or self.scenario.duration_ticks

    @property
    def tick_period_us(self) -> int:
        return int(round(self.scenario.tick_period_s * US_PER_S))

    @property
    def ego_id(self) -> int:
        return self.scenario.ego_id

    @property
    def target_id(self) -> int:
        return self.scenario.target_id

    def build_world(self) -> World:
        return World([_actor(a) for a in self.scenario.actors], WorldClock(self.tick_period_us))

    def vehicle_lidar(self) -> LidarConfig:
        m = self.scenario.vehicle_lidar
        return lidar_config(m, Vec3(*m.mount), self.effective_seed * 1000 + 1)

    def gnss(self) -> GnssPair:
        g = self.scenario.gnss
        return GnssPair(g.front, g.rear, g.noise_sigma_m, self.effective_seed * 1000 + 2)

    def roadside_setups(self) -> list[tuple[SensorRegistration, LidarConfig, RoadsideModel]]:
        out = []
        for i, r in enumerate(self.scenario.roadside):
            pose = Pose(Vec3(*r.position), math.radians(r.yaw_deg))
            reg = SensorRegistration(r.id, ROADSIDE, pose)
            out.append((reg, lidar_config(r.lidar, pose, self.effective_seed * 1000 + 10 + i), r))
        return out

    def detector(self) -> DetectorConfig:
        d = self.scenario.detector
        return DetectorConfig(d.cluster_radius_m, d.min_cluster_size, background_tolerance=d.background_tolerance_m)

    def tracker(self) -> TrackerConfig:
        t = self.scenario.tracker
        return TrackerConfig(t.gate_distance_m, t.smoothing, t.max_misses, t.min_hits, t.smoothing_mode)


def load_scenario_file(path: str | Path) -> ScenarioFile:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}") from exc
    return parse_scenario(raw, str(path))


def parse_scenario(raw: object, origin: str = "<scenario>") -> ScenarioFile:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{origin}: expected a mapping at top level")
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(f"{origin}: {exc}") from exc


def scenario_dir() -> Path:
    return Path(str(resources.files("coopsense") / "scenarios"))


def list_scenarios() -> list[str]:
    return sorted(p.stem for p in scenario_dir().glob("*.yaml"))


def resolve_scenario(name_or_path: str) -> ScenarioFile:
    """Load a shipped scenario by name, or any scenario file by path."""
    p = Path(name_or_path)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return load_scenario_file(p)
    candidate = scenario_dir() / f"{name_or_path}.yaml"
    if not candidate.exists():
        raise ScenarioError(f"unknown scenario {name_or_path!r}; known: {', '.join(list_scenarios())}")
    return load_scenario_file(candidate)
