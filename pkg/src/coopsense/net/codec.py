"""Binary wire format for roadside-to-vehicle perception messages.

Layout, all little-endian::

    magic        4s   b"CPV1"
    version      u8
    sender_id    u32
    timestamp    u64  microseconds
    payload_kind u8   1 = boxes, 2 = cloud
    count        u32
    records      boxes: center xyz, extent xyz, yaw (7 x f64), class u8, point_count u32
                 cloud: x, y, z (3 x f64)
    crc32        u32  over every preceding byte
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..geometry import OrientedBox, Vec3

MAGIC = b"CPV1"
VERSION = 1

KIND_BOXES = 1
KIND_CLOUD = 2

HEADER = struct.Struct("<4sBIQB")
COUNT = struct.Struct("<I")
BOX_RECORD = struct.Struct("<7dBI")
POINT_RECORD = struct.Struct("<3d")
CRC = struct.Struct("<I")

FIXED_OVERHEAD = HEADER.size + COUNT.size + CRC.size
# largest UDP payload over IPv4
MAX_DATAGRAM = 65507

CLASS_CODES = {"unknown": 0, "vehicle": 1, "pedestrian": 2, "bicycle": 3}
CODE_CLASSES = {v: k for k, v in CLASS_CODES.items()}


class CodecError(ValueError):
    pass


class MalformedMessage(CodecError):
    pass


class CrcMismatch(CodecError):
    pass


class UnsupportedVersion(CodecError):
    pass


class PayloadTooLarge(CodecError):
    pass


@dataclass(frozen=True, slots=True)
class WireBox:
    box: OrientedBox
    point_count: int = 0


@dataclass(frozen=True, eq=False)
class PerceptionMessage:
    sender_id: int
    timestamp: int
    payload_kind: int = KIND_BOXES
    boxes: tuple[WireBox, ...] = ()
    points: np.ndarray | None = None
    version: int = VERSION

    def __post_init__(self) -> None:
        if self.payload_kind == KIND_BOXES:
            if self.points is not None:
                raise ValueError("box messages carry no points")
            object.__setattr__(self, "boxes", tuple(self.boxes))
        elif self.payload_kind == KIND_CLOUD:
            if self.boxes:
                raise ValueError("cloud messages carry no boxes")
            pts = np.zeros((0, 3)) if self.points is None else self.points
            pts = np.array(pts, dtype="<f8").reshape(-1, 3)
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
        else:
            raise ValueError(f"unknown payload kind {self.payload_kind}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PerceptionMessage):
            return NotImplemented
        if (self.sender_id, self.timestamp, self.payload_kind, self.version, self.boxes) != (
            other.sender_id, other.timestamp, other.payload_kind, other.version, other.boxes
        ):
            return False
        if self.payload_kind == KIND_CLOUD:
            return np.array_equal(self.points, other.points)
        return True

    __hash__ = None  # type: ignore[assignment]

    @property
    def count(self) -> int:
        return len(self.boxes) if self.payload_kind == KIND_BOXES else len(self.points)


def encoded_size(payload_kind: int, count: int) -> int:
    rec = BOX_RECORD.size if payload_kind == KIND_BOXES else POINT_RECORD.size
    return FIXED_OVERHEAD + rec * count


def encode(msg: PerceptionMessage, max_size: int | None = None) -> bytes:
    """Serialize ``msg``; raise :class:`PayloadTooLarge` past ``max_size`` bytes."""
    size = encoded_size(msg.payload_kind, msg.count)
    if max_size is not None and size > max_size:
        raise PayloadTooLarge(f"message of {size} bytes exceeds limit of {max_size}")
    parts = [
        HEADER.pack(MAGIC, msg.version, msg.sender_id, msg.timestamp, msg.payload_kind),
        COUNT.pack(msg.count),
    ]
    if msg.payload_kind == KIND_BOXES:
        for wb in msg.boxes:
            b = wb.box
            parts.append(
                BOX_RECORD.pack(
                    *b.center, *b.extent, b.yaw, CLASS_CODES[b.class_label], wb.point_count
                )
            )
    else:
        parts.append(msg.points.astype("<f8", copy=False).tobytes())
    body = b"".join(parts)
    return body + CRC.pack(zlib.crc32(body))


def decode(data: bytes) -> PerceptionMessage:
    """Parse and validate one datagram.

    Any structural problem raises a :class:`CodecError` subclass; nothing
    else escapes.
    """
    data = bytes(data)
    if len(data) < FIXED_OVERHEAD:
        raise MalformedMessage(f"datagram of {len(data)} bytes is shorter than the fixed framing")
    magic, version, sender, ts, kind = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MalformedMessage(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported version {version}")
    if kind not in (KIND_BOXES, KIND_CLOUD):
        raise MalformedMessage(f"unknown payload kind {kind}")
    (count,) = COUNT.unpack_from(data, HEADER.size)
    expected = encoded_size(kind, count)
    if len(data) != expected:
        raise MalformedMessage(f"length {len(data)} does not match {count} records ({expected} bytes)")
    body, (crc,) = data[:-CRC.size], CRC.unpack_from(data, len(data) - CRC.size)
    if zlib.crc32(body) != crc:
        raise CrcMismatch("crc32 mismatch")
    offset = HEADER.size + COUNT.size
    try:
        if kind == KIND_BOXES:
            boxes = []
            for i in range(count):
                rec = BOX_RECORD.unpack_from(data, offset + i * BOX_RECORD.size)
                cx, cy, cz, ex, ey, ez, yaw, code, n = rec
                box = OrientedBox(Vec3(cx, cy, cz), Vec3(ex, ey, ez), yaw, CODE_CLASSES[code])
                boxes.append(WireBox(box, n))
            return PerceptionMessage(sender, ts, kind, boxes=tuple(boxes), version=version)
        pts = np.frombuffer(data, dtype="<f8", count=3 * count, offset=offset).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point")
        return PerceptionMessage(sender, ts, kind, points=pts, version=version)
    except (KeyError, ValueError) as exc:
        raise MalformedMessage(f"invalid payload: {exc}") from exc
