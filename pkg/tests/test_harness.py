import csv
import io
import json
import math

import pytest

from coopsense.geometry import OrientedBox, Pose, Vec3
from coopsense.harness import (
    CSV_COLUMNS,
    MetricsReport,
    ScenarioError,
    ScenarioSpec,
    emit_report,
    list_scenarios,
    occlusion_profile,
    report_from_json,
    required_braking_distance,
    resolve_scenario,
)
from coopsense.harness.metrics import azimuth_right_deg, interval_contains
from coopsense.harness.scenario import Route, parse_scenario, route_waypoints
from coopsense.sensors import LidarConfig

SCENARIOS = ("curve_range", "blind_area", "accuracy")


@pytest.mark.parametrize(
    "kmh, metres",
    [(0.0, 0.0), (30.0, 12.694444), (50.0, 28.873457), (10.0, 2.688272)],
)
def test_required_braking_distance(kmh, metres):
    assert required_braking_distance(kmh / 3.6) == pytest.approx(metres, abs=1e-5)


def test_braking_distance_rejects_negative_speed():
    with pytest.raises(ValueError):
        required_braking_distance(-1.0)


def test_shipped_scenarios_listed():
    assert set(SCENARIOS) <= set(list_scenarios())


def test_route_timing_and_geometry():
    route = Route(start=(0, 0), heading_deg=0, speed_mps=5.0,
                  segments=[{"straight": 10}, {"turn_deg": 90, "radius": 10, "speed_mps": 2.5}])
    wps = route_waypoints(route)
    assert wps[1].t_us == 2_000_000 and (wps[1].x, wps[1].y) == (10.0, 0.0)
    end = wps[-1]
    assert (end.x, end.y) == (pytest.approx(20.0), pytest.approx(10.0))
    assert math.degrees(end.yaw) == pytest.approx(90.0)
    assert end.t_us == pytest.approx(2_000_000 + 10 * math.pi / 2 / 2.5 * 1e6, abs=2)


BASE = {
    "name": "tiny", "duration_ticks": 5, "ego_id": 1, "target_id": 2,
    "actors": [
        {"id": 1, "kind": "car", "size": [4.5, 1.8, 1.5], "waypoints": [[0, 0, 0, 0]]},
        {"id": 2, "kind": "pedestrian", "size": [0.5, 0.5, 1.7], "waypoints": [[0, 10, 0, 0]]},
    ],
    "vehicle_lidar": {"max_range_m": 20},
}


@pytest.mark.parametrize(
    "patch",
    [{"bogus": 1}, {"target_id": 9}, {"target_id": 1}, {"duration_ticks": 0},
     {"vehicle_lidar": {"max_range_m": -1}}],
)
def test_invalid_scenarios_are_rejected(patch):
    with pytest.raises(ScenarioError):
        parse_scenario({**BASE, **patch})


def test_coop_requires_roadside_and_known_modes():
    sf = parse_scenario(BASE)
    with pytest.raises(ScenarioError):
        ScenarioSpec(sf, mode="coop")
    with pytest.raises(ScenarioError):
        ScenarioSpec(sf, mode="solo", fusion_mode="late")
    ScenarioSpec(sf, mode="solo")


def test_unknown_scenario_name():
    with pytest.raises(ScenarioError):
        resolve_scenario("no_such_scenario")


def test_occlusion_profile_of_a_side_wall():
    wall = OrientedBox(Vec3(0.0, -3.0, 1.5), Vec3(5.0, 0.5, 1.5))
    cfg = LidarConfig(mount=Vec3(0, 0, 2.0), max_range=20.0)
    [(lo, hi)] = occlusion_profile(Pose(), wall, cfg)
    # wall spans x in [-5, 5] on the right at y in [-3.5, -2.5]
    assert lo == pytest.approx(math.degrees(math.atan2(2.5, 5)), abs=0.5)
    assert hi == pytest.approx(180 - math.degrees(math.atan2(2.5, 5)), abs=0.5)
    assert interval_contains([(lo, hi)], azimuth_right_deg(Pose(), (0.0, -10.0)))


def test_report_json_round_trip(scenario_run):
    report, _ = scenario_run("accuracy", "coop")
    text = report.to_json()
    again = report_from_json(text)
    assert again == report
    assert again.to_json() == text
    json.loads(text)


def test_report_rejects_unknown_fields(scenario_run):
    data = scenario_run("accuracy", "coop")[0].to_dict()
    data["extra"] = 1
    with pytest.raises(ValueError):
        MetricsReport.from_dict(data)


def test_csv_schema(scenario_run, tmp_path):
    report, _ = scenario_run("accuracy", "coop")
    paths = emit_report(report, tmp_path / "out" / "acc.csv", "csv")
    rows = list(csv.reader(io.StringIO(paths[0].read_text())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) - 1 == report.ticks
    assert [int(r[0]) for r in rows[1:]] == list(range(report.ticks))
    assert report_from_json(paths[1].read_text()) == report


def test_report_invariants(scenario_run):
    for name in SCENARIOS:
        for mode in ("solo", "coop"):
            r, _ = scenario_run(name, mode)
            assert all(row.ego_target_distance_m >= 0 for row in r.series)
            for values in r.overlap_series.values():
                assert all(v is None or 0.0 <= v <= 1.0 for v in values)


@pytest.mark.parametrize("name", SCENARIOS)
def test_coop_dominates_solo(scenario_run, name):
    for seed in (None, 1):
        solo, _ = scenario_run(name, "solo", seed=seed)
        coop, _ = scenario_run(name, "coop", seed=seed)
        assert coop.first_detection_tick is not None
        if solo.first_detection_tick is not None:
            assert coop.first_detection_tick <= solo.first_detection_tick
            assert coop.first_detection_distance >= solo.first_detection_distance


@pytest.mark.parametrize("mode", ["solo", "coop"])
def test_blind_area_distance_decreases_until_closest_approach(scenario_run, mode):
    r, _ = scenario_run("blind_area", mode)
    d = [row.ego_target_distance_m for row in r.series]
    k = d.index(min(d))
    assert all(b < a for a, b in zip(d[:k], d[1:k + 1]))


def test_accuracy_fused_never_worse_than_best_single(scenario_run):
    r, _ = scenario_run("accuracy", "coop")
    s = r.overlap_series
    ticks = [i for i in range(len(s["fused"])) if None not in (s["vehicle"][i], s["road"][i], s["fused"][i])]
    assert len(ticks) >= 20
    for i in ticks:
        assert s["fused"][i] >= max(s["vehicle"][i], s["road"][i]) - 0.01
