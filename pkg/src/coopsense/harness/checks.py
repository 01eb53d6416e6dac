"""Pass/fail expectations for the shipped scenarios."""

from __future__ import annotations

from .report import MetricsReport

VEHICLE_RANGE = 20.0
RANGE_TARGET = 30.0
RANGE_TOL = 1.0
BLIND_DISTANCE = 8.0
BLIND_DISTANCE_TOL = 1.0
BLIND_TTC = 1.0
BLIND_TTC_TOL = 0.2
COOP_SAFE_DISTANCE = 20.0
OCCLUSION_SPAN = (10.0, 160.0)
OCCLUSION_TOL = 5.0
TARGET_AZIMUTH = 30.0
OVERLAP_BAND = (0.6, 1.0)


def _within(v, target, tol) -> bool:
    return v is not None and abs(v - target) <= tol


def occlusion_ok(report: MetricsReport) -> bool:
    occ = report.occlusion
    if not occ:
        return False
    lo, hi = OCCLUSION_SPAN
    spans = [
        (a, b) for a, b in occ["blocked_intervals_deg"]
        if abs(a - lo) <= OCCLUSION_TOL and abs(b - hi) <= OCCLUSION_TOL
    ]
    return bool(spans) and occ["target_spawn_blocked"]


def scenario_checks(report: MetricsReport) -> dict[str, bool]:
    """Expectations for ``report``; unknown scenarios have none."""
    d = report.first_detection_distance
    name, coop = report.scenario, report.mode == "coop"
    if name == "curve_range":
        if coop:
            return {"coop_detects_near_30m": _within(d, RANGE_TARGET, RANGE_TOL)}
        return {"solo_detects_within_vehicle_range": d is not None and d <= VEHICLE_RANGE}
    if name == "blind_area":
        checks = {"occlusion_covers_target": occlusion_ok(report)}
        if coop:
            checks["coop_detects_beyond_20m"] = d is not None and d >= COOP_SAFE_DISTANCE
            checks["coop_braking_feasible"] = report.braking_feasible
        else:
            checks["solo_detects_near_8m"] = _within(d, BLIND_DISTANCE, BLIND_DISTANCE_TOL)
            checks["solo_ttc_near_1s"] = _within(
                report.time_to_collision_at_first_detection, BLIND_TTC, BLIND_TTC_TOL
            )
            checks["solo_braking_infeasible"] = not report.braking_feasible
        return checks
    if name == "accuracy" and coop:
        m = report.mean_overlap
        vals = [m.get(k) for k in ("vehicle", "road", "fused")]
        if any(v is None for v in vals):
            return {"fused_overlap_best": False, "overlaps_in_band": False}
        veh, road, fused = vals
        lo, hi = OVERLAP_BAND
        return {
            "fused_overlap_best": fused > veh and fused > road,
            "overlaps_in_band": all(lo <= v <= hi for v in vals),
        }
    return {}
