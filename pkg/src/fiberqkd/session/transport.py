"""Ordered byte-record transports: in-process queues and TCP sockets.

Every record is a length-prefixed byte string (a wire frame, or an oracle-stream
blob), so one receive call always yields exactly one record.
"""
from __future__ import annotations

import io
import queue
import socket
import struct

import numpy as np

DEFAULT_TIMEOUT = 30.0
_LEN = struct.Struct(">I")


class TransportError(RuntimeError):
    pass


class TransportTimeout(TransportError):
    pass


class TransportClosed(TransportError):
    pass


class QueueTransport:
    """One end of an in-process pipe."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = DEFAULT_TIMEOUT):
        self.inbox = inbox
        self.outbox = outbox
        self.timeout = timeout

    def send(self, record: bytes) -> None:
        self.outbox.put(bytes(record))

    def recv(self) -> bytes:
        try:
            item = self.inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportTimeout(f"no message within {self.timeout:g} s") from None
        if item is None:
            raise TransportClosed("peer closed the pipe")
        return item

    def set_timeout(self, timeout: float | None) -> None:
        self.timeout = timeout

    def close(self) -> None:
        self.outbox.put(None)


def loopback_pair(timeout: float = DEFAULT_TIMEOUT) -> tuple[QueueTransport, QueueTransport]:
    a2b: queue.Queue = queue.Queue()
    b2a: queue.Queue = queue.Queue()
    return QueueTransport(b2a, a2b, timeout), QueueTransport(a2b, b2a, timeout)


class SocketTransport:
    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        self.sock = sock
        self.sock.settimeout(timeout)
        self.timeout = timeout

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except socket.timeout:
                raise TransportTimeout(f"no data within {self.timeout:g} s") from None
            except OSError as exc:
                raise TransportError(str(exc)) from exc
            if not chunk:
                raise TransportClosed("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def send(self, record: bytes) -> None:
        try:
            self.sock.sendall(record)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def recv(self) -> bytes:
        head = self._read_exact(_LEN.size)
        (n,) = _LEN.unpack(head)
        return head + self._read_exact(n)

    def set_timeout(self, timeout: float | None) -> None:
        self.sock.settimeout(timeout)
        self.timeout = timeout

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def connect(host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> SocketTransport:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    return SocketTransport(sock, timeout)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


# ------------------------------------------------------------ oracle-stream blobs

def pack_blob(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    body = buf.getvalue()
    return _LEN.pack(len(body)) + body


def unpack_blob(record: bytes) -> dict[str, np.ndarray]:
    with np.load(io.BytesIO(record[_LEN.size :]), allow_pickle=False) as data:
        return {k: data[k] for k in data.files}
