import math

import numpy as np
import pytest

from coopsense.detection import DetectorConfig
from coopsense.fusion import ROADSIDE, SensorRegistration
from coopsense.geometry import OrientedBox, Pose, Vec3
from coopsense.net.codec import KIND_BOXES, KIND_CLOUD, PerceptionMessage, decode, encode
from coopsense.net.nodes import MAX_CLOUD_POINTS, RoadsideNode, VehicleNode, downsample_to_fit
from coopsense.net.transport import InProcTransport, UdpReceiver, UdpSender, UdpTransport
from coopsense.sensors import LidarConfig
from coopsense.world import Actor, Trajectory, World

CAR = OrientedBox(Vec3(0, 0, 0.75), Vec3(2.25, 0.9, 0.75))


def scene():
    ego = Actor(1, "car", CAR, Trajectory.constant_velocity(0, 0, 5, 0, 10))
    target = Actor(2, "car", CAR, Trajectory.constant_velocity(30, 4, -5, 0, 10))
    return World([ego, target])


def roadside(transport, mode="feature", cadence=1):
    pose = Pose(Vec3(25.0, 10.0, 3.0), 0.0)
    reg = SensorRegistration("pole", ROADSIDE, pose)
    return RoadsideNode(reg, LidarConfig(mount=pose, max_range=40.0, seed=3), transport,
                        sender_id=55, cadence=cadence, mode=mode)


def vehicle(mode="feature"):
    return VehicleNode(1, LidarConfig(mount=Vec3(0, 0, 2.0), max_range=20.0, seed=4), fusion_mode=mode)


def test_roadside_message_carries_world_boxes():
    chan = InProcTransport()
    node = roadside(chan)
    snap = scene().snapshot_at(0)
    node.sense(snap)
    [data] = node.publish(0)
    msg = decode(data)
    assert msg.sender_id == 55 and msg.payload_kind == KIND_BOXES
    centers = [(b.box.center.x, b.box.center.y) for b in msg.boxes]
    assert any(math.dist(c, (30, 4)) < 1.5 for c in centers)
    assert chan.receive() == [data]


def test_cadence_skips_ticks():
    node = roadside(InProcTransport(), cadence=3)
    node.sense(scene().snapshot_at(0))
    assert [len(node.publish(k)) for k in range(6)] == [1, 0, 0, 1, 0, 0]


def test_pixel_message_fits_datagram():
    node = roadside(InProcTransport(), mode="pixel")
    node.sense(scene().snapshot_at(0))
    msg = node.build_message()
    assert msg.payload_kind == KIND_CLOUD and 0 < msg.count <= MAX_CLOUD_POINTS


def test_downsample_keeps_every_kth():
    pts = np.arange(30).reshape(10, 3)
    assert len(downsample_to_fit(pts, 4)) == 4
    assert downsample_to_fit(pts, 10) is pts


def test_vehicle_ingest_counts_bad_input_and_staleness():
    veh = vehicle()
    good = encode(PerceptionMessage(5, 1_000_000, KIND_BOXES))
    assert veh.ingest(good, 1_000_000)
    assert not veh.ingest(good[:-1], 1_000_000)
    assert not veh.ingest(good[:-1] + bytes([good[-1] ^ 1]), 1_000_000)
    assert not veh.ingest(encode(PerceptionMessage(5, 1_000_000, KIND_BOXES, version=9)), 1_000_000)
    assert not veh.ingest(encode(PerceptionMessage(5, 700_000, KIND_BOXES)), 1_000_000)
    s = veh.stats
    assert (s.accepted, s.parse_errors, s.crc_errors, s.version_errors, s.stale) == (1, 1, 1, 1, 1)


def test_vehicle_sees_target_through_roadside():
    chan = InProcTransport()
    world = scene()
    node = roadside(chan)
    veh = vehicle()
    remote_seen = False
    for k in range(3):
        snap = world.snapshot_at(k * 100_000)
        node.sense(snap)
        node.publish(k)
        for data in chan.receive():
            veh.ingest(data, snap.timestamp)
        out = veh.perceive(snap)
        remote_seen |= any("v2i:55" in d.source for d in out.detections)
        assert not any(math.dist((d.box.center.x, d.box.center.y), (30 - 0.5 * k, 4)) < 2 for d in out.solo_detections)
    assert remote_seen


def test_severed_link_drops_everything():
    chan = InProcTransport()
    chan.severed = True
    assert not chan.send(b"abc")
    assert chan.receive() == [] and chan.dropped == 1


def test_udp_loopback():
    link = UdpTransport(port=0)
    try:
        msg = encode(PerceptionMessage(3, 100, KIND_BOXES))
        assert link.send(msg)
        assert link.receive(timeout=1.0) == [msg]
        link.severed = True
        assert not link.send(msg)
        assert link.receive(timeout=0.05) == []
    finally:
        link.close()


def test_udp_sender_and_receiver_pair():
    rx = UdpReceiver(port=0)
    tx = UdpSender(*rx.address)
    try:
        for i in range(3):
            tx.send(bytes([i]) * 10)
        got = []
        for _ in range(10):
            got += rx.receive(timeout=0.5)
            if len(got) == 3:
                break
        assert sorted(got) == [bytes([i]) * 10 for i in range(3)]
    finally:
        tx.close()
        rx.close()
