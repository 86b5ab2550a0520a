from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class KeyRole(str, enum.Enum):
    RAW = "raw"
    SIFTED = "sifted"
    RECONCILED = "reconciled"
    AMPLIFIED = "amplified"


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit strings must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit strings may only contain 0 and 1")
    return arr


def bits_to_hex(bits) -> str:
    """Hex encoding prefixed with the bit length, e.g. ``"13:a5f8"``."""
    bits = as_bits(bits)
    return f"{bits.size}:{np.packbits(bits).tobytes().hex()}"


def bits_from_hex(text: str) -> np.ndarray:
    length, _, payload = text.partition(":")
    n = int(length)
    raw = np.frombuffer(bytes.fromhex(payload), dtype=np.uint8)
    return np.unpackbits(raw)[:n].astype(np.uint8)


def key_digest(bits) -> str:
    bits = as_bits(bits)
    h = hashlib.sha256()
    h.update(bits.size.to_bytes(8, "big"))
    h.update(np.packbits(bits).tobytes())
    return h.hexdigest()


@dataclass
class KeyMaterial:
    """A bit string tagged with its processing stage.

    ``disclosed_parity_count`` may only grow; use :meth:`disclose`.
    """

    bits: np.ndarray
    role: KeyRole = KeyRole.SIFTED
    disclosed_parity_count: int = 0
    session_id: int = 0
    hash_descriptor: dict[str, Any] | None = None
    notes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.bits = as_bits(self.bits)
        self.role = KeyRole(self.role)
        if self.role == KeyRole.AMPLIFIED and self.hash_descriptor is None:
            raise ValueError("amplified keys must record their hash descriptor")

    def __len__(self) -> int:
        return int(self.bits.size)

    def disclose(self, n: int) -> None:
        if n < 0:
            raise ValueError("disclosed parity count can only grow")
        self.disclosed_parity_count += int(n)

    def digest(self) -> str:
        return key_digest(self.bits)

    def to_record(self) -> dict[str, Any]:
        return {
            "role": self.role.value,
            "bits": bits_to_hex(self.bits),
            "disclosed_parity_count": self.disclosed_parity_count,
            "session_id": self.session_id,
            "hash_descriptor": self.hash_descriptor,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "KeyMaterial":
        return cls(
            bits=bits_from_hex(record["bits"]),
            role=KeyRole(record["role"]),
            disclosed_parity_count=record.get("disclosed_parity_count", 0),
            session_id=record.get("session_id", 0),
            hash_descriptor=record.get("hash_descriptor"),
        )
