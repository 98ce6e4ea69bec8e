"""Framed byte transports: real sockets, in-process pipes, and wiretaps.

Every message on the wire is one frame: a big-endian u32 length followed by
that many payload bytes. Handshake messages, records, and keystore RPCs all
ride on this framing, over sockets and the test transport alike.
"""

from __future__ import annotations

import queue
import socket
import struct
from typing import Protocol

from .errors import HandshakeTimeout, TransportClosed

MAX_FRAME = 16 * 1024 * 1024


class FrameTransport(Protocol):
    def send_frame(self, payload: bytes) -> None: ...

    def recv_frame(self, timeout: float | None = None) -> bytes: ...


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise ValueError("frame too large")
    return struct.pack(">I", len(payload)) + payload


class SocketTransport:
    """Frames over a connected stream socket."""

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock

    def send_frame(self, payload: bytes) -> None:
        self._sock.sendall(encode_frame(payload))

    def recv_frame(self, timeout: float | None = None) -> bytes:
        self._sock.settimeout(timeout)
        try:
            header = self._recv_exact(4)
            (length,) = struct.unpack(">I", header)
            if length > MAX_FRAME:
                raise TransportClosed("oversized frame")
            return self._recv_exact(length)
        except socket.timeout as exc:
            raise HandshakeTimeout("timed out waiting for frame") from exc

    def _recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise TransportClosed("peer closed connection")
            buf += chunk
        return buf

    def close(self) -> None:
        self._sock.close()


class PipeTransport:
    """One end of an in-process duplex pipe; thread-safe and blocking."""

    def __init__(self, inbox: "queue.Queue[bytes | None]", outbox: "queue.Queue[bytes | None]") -> None:
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send_frame(self, payload: bytes) -> None:
        if self._closed:
            raise TransportClosed("pipe closed")
        self._outbox.put(bytes(payload))

    def recv_frame(self, timeout: float | None = None) -> bytes:
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise HandshakeTimeout("timed out waiting for frame") from None
        if item is None:
            raise TransportClosed("peer closed pipe")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def make_pipe() -> tuple[PipeTransport, PipeTransport]:
    a_to_b: "queue.Queue[bytes | None]" = queue.Queue()
    b_to_a: "queue.Queue[bytes | None]" = queue.Queue()
    return PipeTransport(b_to_a, a_to_b), PipeTransport(a_to_b, b_to_a)


class WiretapTransport:
    """Pass-through transport that appends every frame to a capture list,
    for never-plaintext byte scans over real traffic."""

    def __init__(self, inner: FrameTransport, capture: list[bytes]) -> None:
        self._inner = inner
        self.capture = capture

    def send_frame(self, payload: bytes) -> None:
        self.capture.append(bytes(payload))
        self._inner.send_frame(payload)

    def recv_frame(self, timeout: float | None = None) -> bytes:
        payload = self._inner.recv_frame(timeout)
        self.capture.append(bytes(payload))
        return payload
