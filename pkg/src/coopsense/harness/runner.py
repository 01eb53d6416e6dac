"""End-to-end scenario execution: sense, share, fuse, track, measure."""

from __future__ import annotations

import logging
import math

from ..detection import Detection
from ..geometry import box_overlap_ratio, footprint_distance
from ..net.nodes import RoadsideNode, VehicleNode
from ..net.transport import InProcTransport, UdpTransport
from ..sensors import capture_background
from ..tracking import Tracker
from . import metrics
from .checks import scenario_checks
from .report import MetricsReport, TickRecord
from .scenario import ScenarioSpec

log = logging.getLogger(__name__)

TRANSPORTS = ("inproc", "udp")


def make_transport(kind: str, port: int | None = None):
    if kind == "inproc":
        return InProcTransport()
    if kind == "udp":
        return UdpTransport(port=0 if port is None else port)
    raise ValueError(f"unknown transport {kind!r}")


def _ego_speed(spec: ScenarioSpec, world, t_us: int) -> float:
    traj = world.actor(spec.ego_id).trajectory
    dt = spec.tick_period_us
    a = traj.pose_at(t_us - dt).position
    b = traj.pose_at(t_us + dt).position
    return math.hypot(b.x - a.x, b.y - a.y) / (2 * dt / 1e6)


def _round(v: float | None, nd: int = 6) -> float | None:
    return None if v is None else round(float(v), nd)


def run_scenario(
    spec: ScenarioSpec,
    transport: str = "inproc",
    *,
    channel=None,
    include_roadside: bool | None = None,
) -> MetricsReport:
    """Run one scenario and compute its metrics.

    ``channel`` overrides the transport object (tests use it to sever the
    link). ``include_roadside=False`` runs with no roadside node at all.
    """
    if transport not in TRANSPORTS:
        raise ValueError(f"transport must be one of {TRANSPORTS}")
    world = spec.build_world()
    tick_us = spec.tick_period_us
    detector = spec.detector()
    cfg = spec.scenario
    coop = spec.mode == "coop"
    if include_roadside is None:
        include_roadside = coop
    channel = channel if channel is not None else make_transport(transport)

    initial = world.snapshot_at(0)
    statics = initial.only(["static_obstacle"])
    roadside = []
    for reg, lidar, model in spec.roadside_setups():
        background = capture_background(lidar, reg.pose, statics, source=reg.sensor_id)
        roadside.append(
            RoadsideNode(
                reg, lidar, channel,
                sender_id=model.sender_id, detector=detector, background=background,
                cadence=model.cadence, mode=spec.fusion_mode,
            )
        )
    vehicle = VehicleNode(
        spec.ego_id, spec.vehicle_lidar(), spec.gnss(),
        detector=detector, fusion_mode=spec.fusion_mode, tracker=Tracker(spec.tracker()),
        iou_threshold=cfg.fusion.iou_threshold, tick_period=tick_us,
    )

    report = MetricsReport(
        scenario=spec.name, mode=spec.mode, fusion_mode=spec.fusion_mode, transport=transport,
        seed=spec.effective_seed, ticks=spec.ticks, tick_period_s=cfg.tick_period_s,
    )
    if cfg.blocker_id is not None:
        blocker = initial.box(cfg.blocker_id)
        intervals = metrics.occlusion_profile(initial.pose(spec.ego_id), blocker, vehicle.lidar)
        az = metrics.azimuth_right_deg(initial.pose(spec.ego_id), initial.box(spec.target_id).center)
        report.occlusion = {
            "blocked_intervals_deg": [(_round(a, 3), _round(b, 3)) for a, b in intervals],
            "target_spawn_azimuth_deg": _round(az, 3),
            "target_spawn_blocked": metrics.interval_contains(intervals, az),
        }

    overlap = {"vehicle": [], "road": [], "fused": []}
    min_gap = math.inf
    first_tick = None
    collision_tick = None
    max_range = 0.0
    try:
        for k in range(spec.ticks):
            snap = world.snapshot_at(k * tick_us) if k == 0 else world.step()
            now = snap.timestamp
            road_dets: list[Detection] = []
            for node in roadside:
                node.sense(snap)
                if include_roadside and coop:
                    sent = node.publish(k)
                    log.debug("tick %d: %s sent %d message(s)", k, node.sensor_id, len(sent))
                road_dets.extend(node.detections())
            if include_roadside and coop:
                for data in channel.receive(timeout=0.2 if transport == "udp" else 0.0):
                    vehicle.ingest(data, now)
            out = vehicle.perceive(snap)

            ego_box = snap.box(spec.ego_id)
            target_box = snap.box(spec.target_id)
            gap = footprint_distance(ego_box, target_box)
            min_gap = min(min_gap, gap)
            if gap == 0.0 and collision_tick is None:
                collision_tick = k

            tracked = False
            for trk in out.tracks:
                c = trk.last_box.center
                max_range = max(max_range, math.hypot(c.x - out.pose.position.x, c.y - out.pose.position.y))
                if metrics.truth_actor_for(trk.last_box, snap) == spec.target_id:
                    tracked = True
            if tracked and first_tick is None:
                first_tick = k
                report.first_detection_tick = k
                report.first_detection_time_s = _round(now / 1e6)
                report.first_detection_distance = _round(gap)
                speed = _ego_speed(spec, world, now)
                report.ego_speed_at_detection_mps = _round(speed)
                report.required_braking_distance_m = _round(metrics.required_braking_distance(speed))

            veh_det = metrics.detection_of(out.solo_detections, spec.target_id, snap)
            road_det = metrics.detection_of(road_dets, spec.target_id, snap)
            row = TickRecord(
                tick=k, time_s=_round(now / 1e6), ego_target_distance_m=_round(gap),
                target_tracked=tracked, vehicle_sensed=veh_det is not None,
                road_sensed=road_det is not None,
            )
            if cfg.evaluate_overlap:
                fused_det = metrics.detection_of(out.detections, spec.target_id, snap)
                for key, det in (("vehicle", veh_det), ("road", road_det), ("fused", fused_det)):
                    value = None if det is None else _round(box_overlap_ratio(det.box, target_box))
                    overlap[key].append(value)
                    setattr(row, f"overlap_{key}", value)
            report.series.append(row)
    finally:
        if hasattr(channel, "close") and transport == "udp":
            channel.close()

    report.min_approach_distance = _round(min_gap)
    report.collision_flag = collision_tick is not None
    if collision_tick is not None:
        report.collision_time_s = _round(collision_tick * tick_us / 1e6)
    if first_tick is not None:
        if collision_tick is not None and collision_tick >= first_tick:
            report.time_to_collision_at_first_detection = _round((collision_tick - first_tick) * tick_us / 1e6)
        report.braking_feasible = bool(
            report.first_detection_distance >= report.required_braking_distance_m
        )
    report.max_perception_range_m = _round(max_range)

    if cfg.evaluate_overlap:
        report.overlap_series = overlap
        complete = [i for i in range(len(overlap["fused"])) if all(overlap[s][i] is not None for s in overlap)]
        report.evaluated_overlap_ticks = len(complete)
        report.mean_overlap = {
            s: _round(metrics.mean([overlap[s][i] for i in complete])) for s in overlap
        }
        report.reference_overlap = dict(metrics.REFERENCE_OVERLAP)
    report.ingest = {
        "accepted": vehicle.stats.accepted,
        "stale": vehicle.stats.stale,
        "parse_errors": vehicle.stats.parse_errors,
        "crc_errors": vehicle.stats.crc_errors,
        "version_errors": vehicle.stats.version_errors,
    }
    report.checks = scenario_checks(report)
    return report
