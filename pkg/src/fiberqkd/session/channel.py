"""Authenticated, sequenced public channel over a transport."""
from __future__ import annotations

from dataclasses import dataclass, field

import hmac

import numpy as np

from ..postprocessing.auth import BITS_PER_MESSAGE, AuthKeyPool, PoolExhausted, tag_with_key
from .wire import (
    UNTAGGED,
    FrameError,
    LoggedFrame,
    MsgType,
    PublicMessage,
    decode_payload,
    frame_decode,
    frame_encode,
    make_message,
)


class ProtocolAbort(RuntimeError):
    """The session ends without key output; ``reason`` is logged."""

    def __init__(self, reason: str, remote: bool = False):
        super().__init__(reason)
        self.reason = reason
        self.remote = remote


class AuthenticationFailure(ProtocolAbort):
    pass


def pool_seed(secret: int, direction: str) -> int:
    return int(secret) * 4 + (1 if direction == "a2b" else 2)


@dataclass
class PublicChannel:
    """One endpoint's view: it tags outgoing frames and verifies incoming ones.

    Every frame is appended to ``log`` in the order this endpoint saw it.
    """

    transport: object
    role: str  # "alice" or "bob"
    session_id: int
    send_pool: AuthKeyPool
    recv_pool: AuthKeyPool
    log: list[LoggedFrame] = field(default_factory=list)
    out_seq: int = 0
    in_seq: int = 0

    @property
    def out_dir(self) -> str:
        return "a2b" if self.role == "alice" else "b2a"

    @property
    def in_dir(self) -> str:
        return "b2a" if self.role == "alice" else "a2b"

    def send(self, msg_type: MsgType, encrypt: tuple[str, ...] = (), **fields) -> PublicMessage:
        """Tag and send.  Bit fields named in ``encrypt`` are one-time padded.

        The tag key is drawn before the pad, matching the receiver, which
        verifies first and decrypts afterwards.
        """
        key = None
        if msg_type not in UNTAGGED:
            try:
                key = self.send_pool.take(BITS_PER_MESSAGE)
            except PoolExhausted:
                if msg_type != MsgType.ABORT:
                    raise
        shown = dict(fields)
        for name in encrypt:
            bits = np.asarray(fields[name], dtype=np.uint8)
            shown[name] = bits ^ self.send_pool.take(bits.size, "parity-pad")
        msg = make_message(msg_type, self.session_id, self.out_seq, **shown)
        if key is not None:
            msg = msg.with_tag(tag_with_key(msg.signed_bytes(), key))
        frame = frame_encode(msg)
        self.out_seq += 1
        self.log.append(LoggedFrame(self.out_dir, frame, fields))
        self.transport.send(frame)
        return msg

    def receive(self, *expected: MsgType, decrypt: tuple[str, ...] = ()) -> dict:
        frame = self.transport.recv()
        try:
            msg = frame_decode(frame)
            fields = decode_payload(msg.msg_type, msg.payload)
        except FrameError as exc:
            raise ProtocolAbort(f"malformed frame: {exc}") from exc
        self.log.append(LoggedFrame(self.in_dir, frame, fields))
        if msg.sequence != self.in_seq:
            raise ProtocolAbort(f"sequence {msg.sequence} received, {self.in_seq} expected")
        self.in_seq += 1
        if msg.session_id != self.session_id and msg.msg_type != MsgType.HELLO:
            raise ProtocolAbort("session id mismatch")
        if msg.msg_type not in UNTAGGED:
            try:
                key = self.recv_pool.take(BITS_PER_MESSAGE)
            except PoolExhausted as exc:
                raise ProtocolAbort("authentication pool exhausted") from exc
            expected_tag = tag_with_key(msg.signed_bytes(), key).to_bytes(8, "big")
            if not hmac.compare_digest(expected_tag, msg.auth_tag.to_bytes(8, "big")):
                raise AuthenticationFailure("authentication failure")
        if msg.msg_type == MsgType.ABORT:
            raise ProtocolAbort(fields["reason"], remote=True)
        if expected and msg.msg_type not in expected:
            raise ProtocolAbort(f"unexpected {msg.msg_type.name}")
        for name in decrypt:
            try:
                pad = self.recv_pool.take(fields[name].size, "parity-pad")
            except PoolExhausted as exc:
                raise ProtocolAbort("authentication pool exhausted") from exc
            fields[name] = fields[name] ^ pad
        return fields
