"""Binary framing and payload schema of the public channel.

Frame layout (all integers big-endian)::

    length   u32   number of bytes that follow
    version  u8
    msg_type u8
    session  u64
    sequence u32
    payload  ...
    tag      u64

The tag covers every byte between the length field and the tag itself.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

VERSION = 1
SUPPORTED_VERSIONS = (VERSION,)

_LENGTH = struct.Struct(">I")
_HEADER = struct.Struct(">BBQI")
_TAG = struct.Struct(">Q")
FRAME_OVERHEAD = _HEADER.size + _TAG.size  # length-field value of an empty-payload frame
MAX_FRAME = 1 << 30


class MsgType(enum.IntEnum):
    HELLO = 1
    PARAMS = 2
    INDEX_LIST = 3
    BASIS_LIST = 4
    PARITY_REPORT = 5
    PERMUTATION_SEED = 6
    HASH_SEED = 7
    VERIFY_PARITY = 8
    REPLENISH = 9
    ABORT = 10


UNTAGGED = frozenset({MsgType.HELLO})


class FrameError(ValueError):
    """Malformed frame or payload."""


@dataclass(frozen=True)
class PublicMessage:
    msg_type: MsgType
    session_id: int
    sequence: int
    payload: bytes = b""
    auth_tag: int = 0
    version: int = VERSION

    def signed_bytes(self) -> bytes:
        return _HEADER.pack(self.version, int(self.msg_type), self.session_id, self.sequence) + self.payload

    def with_tag(self, tag: int) -> "PublicMessage":
        return PublicMessage(self.msg_type, self.session_id, self.sequence, self.payload, tag, self.version)


def frame_encode(msg: PublicMessage) -> bytes:
    body = msg.signed_bytes() + _TAG.pack(msg.auth_tag)
    return _LENGTH.pack(len(body)) + body


def frame_decode(data: bytes) -> PublicMessage:
    if len(data) < _LENGTH.size:
        raise FrameError("truncated frame: missing length field")
    (length,) = _LENGTH.unpack_from(data)
    if length != len(data) - _LENGTH.size:
        raise FrameError(f"length field says {length} bytes, frame carries {len(data) - _LENGTH.size}")
    if length < FRAME_OVERHEAD:
        raise FrameError("frame shorter than the fixed header")
    if length > MAX_FRAME:
        raise FrameError("frame exceeds the maximum size")
    version, mtype, session_id, sequence = _HEADER.unpack_from(data, _LENGTH.size)
    if version not in SUPPORTED_VERSIONS:
        raise FrameError(f"unsupported frame version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise FrameError(f"unknown message type {mtype}") from None
    payload = bytes(data[_LENGTH.size + _HEADER.size : len(data) - _TAG.size])
    (tag,) = _TAG.unpack_from(data, len(data) - _TAG.size)
    return PublicMessage(mtype, session_id, sequence, payload, tag, version)


# ------------------------------------------------------------------ payload schema
#
# Field kinds: u8, u32, u64, text, digest (32 bytes), u8list, indices (sorted
# clock indices), bits (a packed public bit string: bases or parities only).

SCHEMA: dict[MsgType, tuple[tuple[str, str], ...]] = {
    MsgType.HELLO: (("role", "text"), ("versions", "u8list")),
    MsgType.PARAMS: (("config_digest", "digest"), ("kind", "text"), ("n_pulses", "u64"), ("ack", "u8")),
    MsgType.INDEX_LIST: (("purpose", "text"), ("indices", "indices")),
    MsgType.BASIS_LIST: (("bases", "bits"),),
    MsgType.PARITY_REPORT: (
        ("pass_index", "u32"),
        ("encrypted", "u8"),
        ("row_parities", "bits"),
        ("col_parities", "bits"),
    ),
    MsgType.PERMUTATION_SEED: (("pass_index", "u32"), ("seed", "u64")),
    MsgType.HASH_SEED: (("seed", "u64"), ("n_in", "u64"), ("n_out", "u64")),
    MsgType.VERIFY_PARITY: (("pass_index", "u32"), ("seed", "u64"), ("parities", "bits"), ("agree", "u8")),
    MsgType.REPLENISH: (("to_a2b", "u64"), ("to_b2a", "u64")),
    MsgType.ABORT: (("reason", "text"),),
}

# Names a public bit-string field may carry.  Key bits are never among them.
PUBLIC_BIT_FIELDS = frozenset({"bases", "row_parities", "col_parities", "parities"})


def _pack_bits(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    return struct.pack(">I", bits.size) + np.packbits(bits).tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameError("payload truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))[0]


def encode_payload(msg_type: MsgType, fields: dict) -> bytes:
    schema = SCHEMA[MsgType(msg_type)]
    extra = set(fields) - {name for name, _ in schema}
    if extra:
        raise FrameError(f"fields {sorted(extra)} are not in the {MsgType(msg_type).name} schema")
    out = bytearray()
    for name, kind in schema:
        value = fields[name]
        if kind == "u8":
            out += struct.pack(">B", value)
        elif kind == "u32":
            out += struct.pack(">I", value)
        elif kind == "u64":
            out += struct.pack(">Q", value)
        elif kind == "text":
            raw = str(value).encode("utf-8")
            out += struct.pack(">H", len(raw)) + raw
        elif kind == "digest":
            if len(value) != 32:
                raise FrameError("digest fields hold exactly 32 bytes")
            out += bytes(value)
        elif kind == "u8list":
            out += struct.pack(">B", len(value)) + bytes(value)
        elif kind == "indices":
            idx = np.asarray(value, dtype=np.int64)
            if idx.size and (idx[0] < 0 or np.any(np.diff(idx) <= 0)):
                raise FrameError("indices must be non-negative and strictly increasing")
            out += struct.pack(">I", idx.size) + idx.astype(">u8").tobytes()
        elif kind == "bits":
            out += _pack_bits(value)
        else:  # pragma: no cover - schema is static
            raise AssertionError(kind)
    return bytes(out)


def decode_payload(msg_type: MsgType, payload: bytes) -> dict:
    r = _Reader(payload)
    fields: dict = {}
    for name, kind in SCHEMA[MsgType(msg_type)]:
        if kind == "u8":
            fields[name] = r.unpack(">B")
        elif kind == "u32":
            fields[name] = r.unpack(">I")
        elif kind == "u64":
            fields[name] = r.unpack(">Q")
        elif kind == "text":
            try:
                fields[name] = r.take(r.unpack(">H")).decode("utf-8")
            except UnicodeDecodeError:
                raise FrameError("text field is not valid UTF-8") from None
        elif kind == "digest":
            fields[name] = r.take(32)
        elif kind == "u8list":
            fields[name] = list(r.take(r.unpack(">B")))
        elif kind == "indices":
            n = r.unpack(">I")
            idx = np.frombuffer(r.take(8 * n), dtype=">u8").astype(np.int64)
            if idx.size and np.any(np.diff(idx) <= 0):
                raise FrameError("indices must be strictly increasing")
            fields[name] = idx
        elif kind == "bits":
            n = r.unpack(">I")
            raw = np.frombuffer(r.take((n + 7) // 8), dtype=np.uint8)
            fields[name] = np.unpackbits(raw)[:n].astype(np.uint8)
    if r.pos != len(payload):
        raise FrameError("trailing bytes after payload fields")
    return fields


def make_message(msg_type: MsgType, session_id: int, sequence: int, **fields) -> PublicMessage:
    return PublicMessage(MsgType(msg_type), session_id, sequence, encode_payload(msg_type, fields))


@dataclass
class LoggedFrame:
    """One frame as seen by the logging endpoint: ``direction`` is ``"a2b"`` or ``"b2a"``."""

    direction: str
    frame: bytes
    fields: dict = field(default_factory=dict, compare=False)

    @property
    def message(self) -> PublicMessage:
        return frame_decode(self.frame)


def schema_audit() -> list[str]:
    """Static check that every bit-string field is a declared public quantity."""
    problems = []
    for mtype, schema in SCHEMA.items():
        for name, kind in schema:
            if kind == "bits" and name not in PUBLIC_BIT_FIELDS:
                problems.append(f"{mtype.name}.{name} carries an undeclared bit string")
            if "key" in name:
                problems.append(f"{mtype.name}.{name} looks like key material")
    return problems


def payload_contains_key(payload: bytes, key_bits, chunk_bytes: int = 8) -> bool:
    """True when any aligned ``chunk_bytes`` slice of the packed key appears in ``payload``."""
    packed = np.packbits(np.asarray(key_bits, dtype=np.uint8)).tobytes()
    for i in range(0, len(packed) - chunk_bytes + 1, chunk_bytes):
        if packed[i : i + chunk_bytes] in payload:
            return True
    return False
