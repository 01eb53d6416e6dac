"""Connectionless message transports: an in-process channel and UDP."""

from __future__ import annotations

import logging
import os
import select
import socket
from collections import deque

from .codec import MAX_DATAGRAM, PayloadTooLarge

log = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 47047
PORT_ENV = "COOPSENSE_PORT"


def default_port() -> int:
    return int(os.environ.get(PORT_ENV, DEFAULT_PORT))


class InProcTransport:
    """Lossless FIFO with datagram semantics, for deterministic tests.

    Setting ``severed`` drops everything sent, like a dead radio link.
    """

    def __init__(self, max_datagram: int = MAX_DATAGRAM):
        self.max_datagram = max_datagram
        self.severed = False
        self._queue: deque[bytes] = deque()
        self.sent = 0
        self.dropped = 0

    def send(self, data: bytes) -> bool:
        if len(data) > self.max_datagram:
            raise PayloadTooLarge(f"{len(data)} byte datagram exceeds {self.max_datagram}")
        if self.severed:
            self.dropped += 1
            return False
        self._queue.append(bytes(data))
        self.sent += 1
        return True

    def receive(self, timeout: float = 0.0) -> list[bytes]:
        out = list(self._queue)
        self._queue.clear()
        return out

    def close(self) -> None:
        self._queue.clear()


class UdpSender:
    def __init__(self, host: str = DEFAULT_HOST, port: int | None = None):
        self.address = (host, default_port() if port is None else port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sent = 0

    def send(self, data: bytes) -> bool:
        if len(data) > MAX_DATAGRAM:
            raise PayloadTooLarge(f"{len(data)} byte datagram exceeds {MAX_DATAGRAM}")
        self._sock.sendto(data, self.address)
        self.sent += 1
        return True

    def close(self) -> None:
        self._sock.close()


class UdpReceiver:
    """Non-blocking datagram receiver bound to ``host:port`` (0 picks a free port)."""

    def __init__(self, host: str = DEFAULT_HOST, port: int | None = None):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, default_port() if port is None else port))
        self._sock.setblocking(False)

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()

    def receive(self, timeout: float = 0.0) -> list[bytes]:
        """Drain queued datagrams, waiting up to ``timeout`` s for the first one."""
        out = []
        if timeout > 0:
            ready, _, _ = select.select([self._sock], [], [], timeout)
            if not ready:
                return out
        while True:
            try:
                data, _ = self._sock.recvfrom(MAX_DATAGRAM + 1)
            except BlockingIOError:
                return out
            out.append(data)

    def close(self) -> None:
        self._sock.close()


class UdpTransport:
    """Sender and receiver on one loopback port, for single-process runs."""

    def __init__(self, host: str = DEFAULT_HOST, port: int | None = None):
        self.receiver = UdpReceiver(host, port)
        self.sender = UdpSender(*self.receiver.address)
        self.severed = False

    def send(self, data: bytes) -> bool:
        if self.severed:
            return False
        return self.sender.send(data)

    def receive(self, timeout: float = 0.0) -> list[bytes]:
        return self.receiver.receive(timeout)

    def close(self) -> None:
        self.sender.close()
        self.receiver.close()
