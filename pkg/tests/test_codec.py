import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopsense.geometry import OrientedBox, Vec3
from coopsense.net.codec import (
    FIXED_OVERHEAD,
    KIND_BOXES,
    KIND_CLOUD,
    MAX_DATAGRAM,
    CodecError,
    CrcMismatch,
    MalformedMessage,
    PayloadTooLarge,
    PerceptionMessage,
    UnsupportedVersion,
    WireBox,
    decode,
    encode,
    encoded_size,
)

FIXTURES = Path(__file__).parent / "fixtures"

GOLDEN = {
    "boxes_v1.bin": PerceptionMessage(
        101, 1_200_000, KIND_BOXES,
        boxes=(
            WireBox(OrientedBox(Vec3(10.5, -3.25, 0.75), Vec3(2.25, 0.9, 0.75), 0.5, "vehicle"), 120),
            WireBox(OrientedBox(Vec3(4.0, 8.0, 0.85), Vec3(0.25, 0.25, 0.85), -1.0, "pedestrian"), 17),
        ),
    ),
    "cloud_v1.bin": PerceptionMessage(
        202, 300_000, KIND_CLOUD,
        points=np.array([[1.0, 2.0, 3.0], [-4.5, 0.0, 1.25], [100.0, -100.0, 0.5]]),
    ),
    "empty_boxes_v1.bin": PerceptionMessage(7, 0, KIND_BOXES),
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_encode_is_byte_identical(name):
    assert encode(GOLDEN[name]) == (FIXTURES / name).read_bytes()


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_decode(name):
    assert decode((FIXTURES / name).read_bytes()) == GOLDEN[name]


def test_hand_checked_empty_message_layout():
    expected = bytes.fromhex(
        "43505631"          # magic
        "01"                # version
        "07000000"          # sender id
        "0000000000000000"  # timestamp
        "01"                # payload kind
        "00000000"          # count
        "c0d883a5"          # crc32 of the preceding bytes
    )
    assert encode(GOLDEN["empty_boxes_v1.bin"]) == expected


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(0.01, 50.0)
wire_boxes = st.builds(
    lambda c, e, yaw, label, n: WireBox(OrientedBox(Vec3(*c), Vec3(*e), yaw, label), n),
    st.tuples(finite, finite, finite), st.tuples(positive, positive, positive),
    st.floats(-math.pi, math.pi), st.sampled_from(["vehicle", "pedestrian", "bicycle", "unknown"]),
    st.integers(0, 2**32 - 1),
)
box_messages = st.builds(
    lambda s, t, b: PerceptionMessage(s, t, KIND_BOXES, boxes=tuple(b)),
    st.integers(0, 2**32 - 1), st.integers(0, 2**64 - 1), st.lists(wire_boxes, max_size=20),
)
cloud_messages = st.builds(
    lambda s, t, p: PerceptionMessage(s, t, KIND_CLOUD, points=np.array(p).reshape(-1, 3)),
    st.integers(0, 2**32 - 1), st.integers(0, 2**64 - 1),
    st.lists(st.tuples(finite, finite, finite), max_size=50),
)
messages = st.one_of(box_messages, cloud_messages)


@settings(max_examples=500, deadline=None)
@given(msg=messages)
def test_round_trip(msg):
    data = encode(msg)
    assert len(data) == encoded_size(msg.payload_kind, msg.count)
    assert decode(data) == msg
    assert encode(decode(data)) == data


def corpus():
    out = [(FIXTURES / n).read_bytes() for n in sorted(GOLDEN)]
    rng = np.random.default_rng(4)
    out.append(encode(PerceptionMessage(9, 42, KIND_CLOUD, points=rng.normal(0, 10, (40, 3)))))
    return out


@pytest.mark.parametrize("data", corpus(), ids=lambda d: f"{len(d)}B")
def test_every_single_byte_corruption_is_rejected(data):
    rejected = total = 0
    for i in range(len(data)):
        for delta in (1, 0x80, 0xFF):
            bad = bytearray(data)
            bad[i] ^= delta
            total += 1
            try:
                decode(bytes(bad))
            except CodecError:
                rejected += 1
    assert rejected == total


@pytest.mark.parametrize("data", corpus(), ids=lambda d: f"{len(d)}B")
def test_every_truncation_is_rejected(data):
    for n in range(len(data)):
        with pytest.raises(CodecError):
            decode(data[:n])
    with pytest.raises(CodecError):
        decode(data + b"\x00")


@settings(max_examples=500, deadline=None)
@given(data=st.binary(max_size=200))
def test_arbitrary_bytes_never_escape_as_other_errors(data):
    try:
        decode(data)
    except CodecError:
        pass


def test_specific_error_kinds():
    good = encode(GOLDEN["empty_boxes_v1.bin"])
    bad_crc = good[:-1] + bytes([good[-1] ^ 1])
    with pytest.raises(CrcMismatch):
        decode(bad_crc)
    with pytest.raises(MalformedMessage):
        decode(b"XXXX" + good[4:])
    with pytest.raises(UnsupportedVersion):
        decode(encode(PerceptionMessage(7, 0, KIND_BOXES, version=2)))
    with pytest.raises(MalformedMessage):
        decode(good[:FIXED_OVERHEAD - 1])


def test_payload_limit():
    n = (MAX_DATAGRAM - FIXED_OVERHEAD) // 24 + 1
    msg = PerceptionMessage(1, 0, KIND_CLOUD, points=np.zeros((n, 3)))
    with pytest.raises(PayloadTooLarge):
        encode(msg, max_size=MAX_DATAGRAM)
    assert len(encode(msg)) > MAX_DATAGRAM


def test_message_kind_consistency():
    with pytest.raises(ValueError):
        PerceptionMessage(1, 0, KIND_BOXES, points=np.zeros((1, 3)))
    with pytest.raises(ValueError):
        PerceptionMessage(1, 0, 9)
