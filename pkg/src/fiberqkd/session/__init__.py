"""Authenticated public channel: wire format, transports, endpoints and transcripts.

Endpoint drivers live in :mod:`fiberqkd.session.endpoint`; they are not imported
here so that :mod:`fiberqkd.protocol` can use the wire layer without a cycle.
"""
from .channel import AuthenticationFailure, ProtocolAbort, PublicChannel
from .transcript import SessionTranscript
from .transport import TransportClosed, TransportError, TransportTimeout, loopback_pair
from .wire import (
    FRAME_OVERHEAD,
    VERSION,
    FrameError,
    MsgType,
    PublicMessage,
    decode_payload,
    encode_payload,
    frame_decode,
    frame_encode,
)

__all__ = [
    "AuthenticationFailure",
    "FRAME_OVERHEAD",
    "FrameError",
    "MsgType",
    "ProtocolAbort",
    "PublicChannel",
    "PublicMessage",
    "SessionTranscript",
    "TransportClosed",
    "TransportError",
    "TransportTimeout",
    "VERSION",
    "decode_payload",
    "encode_payload",
    "frame_decode",
    "frame_encode",
    "loopback_pair",
]
