"""Metrics report container and its JSON / CSV serializations."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

CSV_COLUMNS = (
    "tick",
    "time_s",
    "ego_target_distance_m",
    "target_tracked",
    "vehicle_sensed",
    "road_sensed",
    "overlap_vehicle",
    "overlap_road",
    "overlap_fused",
)


@dataclass
class TickRecord:
    tick: int
    time_s: float
    ego_target_distance_m: float
    target_tracked: bool
    vehicle_sensed: bool
    road_sensed: bool
    overlap_vehicle: float | None = None
    overlap_road: float | None = None
    overlap_fused: float | None = None


@dataclass
class MetricsReport:
    scenario: str
    mode: str
    fusion_mode: str
    transport: str
    seed: int
    ticks: int
    tick_period_s: float
    first_detection_tick: int | None = None
    first_detection_time_s: float | None = None
    first_detection_distance: float | None = None
    time_to_collision_at_first_detection: float | None = None
    min_approach_distance: float = 0.0
    collision_flag: bool = False
    collision_time_s: float | None = None
    ego_speed_at_detection_mps: float | None = None
    required_braking_distance_m: float | None = None
    braking_feasible: bool = False
    max_perception_range_m: float = 0.0
    occlusion: dict[str, Any] | None = None
    overlap_series: dict[str, list[float | None]] = field(default_factory=dict)
    mean_overlap: dict[str, float | None] = field(default_factory=dict)
    evaluated_overlap_ticks: int = 0
    reference_overlap: dict[str, float] = field(default_factory=dict)
    ingest: dict[str, int] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    series: list[TickRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricsReport":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown report fields: {sorted(unknown)}")
        data = dict(data)
        data["series"] = [TickRecord(**row) for row in data.get("series", [])]
        if data.get("occlusion") is not None:
            occ = dict(data["occlusion"])
            occ["blocked_intervals_deg"] = [tuple(iv) for iv in occ["blocked_intervals_deg"]]
            data["occlusion"] = occ
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.series:
            writer.writerow(["" if getattr(row, c) is None else _cell(getattr(row, c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def report_from_json(text: str) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(text))


def emit_report(report: MetricsReport, out: str | Path, fmt: str = "json") -> list[Path]:
    """Write ``report`` to ``out``.

    ``json`` writes the whole report to ``out``; ``csv`` writes the per-tick
    series to ``out`` and the summary JSON beside it (``.summary.json``).
    """
    out = Path(out)
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        out.write_text(report.to_json())
        return [out]
    out.write_text(report.to_csv())
    summary = out.with_suffix(".summary.json")
    summary.write_text(report.to_json())
    return [out, summary]
