"""Vehicle-infrastructure sharing channel."""

from .codec import (
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
)
from .nodes import IngestStats, RoadsideNode, VehicleNode, VehicleOutput
from .transport import InProcTransport, UdpReceiver, UdpSender, UdpTransport
