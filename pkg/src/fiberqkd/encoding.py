"""Phase encodings of the two protocols and the detector-port bit mapping."""
from __future__ import annotations

import enum
import math

import numpy as np

from .optics import Port


class ProtocolKind(str, enum.Enum):
    B92 = "b92"
    BB84 = "bb84"


# B92 keys on a single detector.
B92_PORT = Port.CONSTRUCTIVE
# BB84: same-basis photons reach CONSTRUCTIVE for bit 0 and DESTRUCTIVE for bit 1.
BB84_BIT_FOR_PORT = {Port.CONSTRUCTIVE: 0, Port.DESTRUCTIVE: 1}

_B92_ALICE = (0.0, math.pi / 2)
_B92_BOB = (3 * math.pi / 2, math.pi)
_BB84_ALICE = ((0.0, math.pi), (math.pi / 2, 3 * math.pi / 2))
_BB84_BOB = (0.0, math.pi / 2)


def _check_bit(value, name: str = "bit") -> int:
    if value not in (0, 1) or isinstance(value, bool):
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


def b92_alice_phase(bit: int) -> float:
    return _B92_ALICE[_check_bit(bit)]


def b92_bob_phase(bit: int) -> float:
    return _B92_BOB[_check_bit(bit)]


def bb84_alice_phase(basis: int, bit: int) -> float:
    return _BB84_ALICE[_check_bit(basis, "basis")][_check_bit(bit)]


def bb84_bob_phase(basis: int) -> float:
    return _BB84_BOB[_check_bit(basis, "basis")]


def alice_phases(kind: ProtocolKind, bits: np.ndarray, bases: np.ndarray | None = None) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.intp)
    if ProtocolKind(kind) == ProtocolKind.B92:
        return np.asarray(_B92_ALICE)[bits]
    return np.asarray(_BB84_ALICE)[np.asarray(bases, dtype=np.intp), bits]


def bob_phases(kind: ProtocolKind, bits: np.ndarray | None, bases: np.ndarray | None = None) -> np.ndarray:
    if ProtocolKind(kind) == ProtocolKind.B92:
        return np.asarray(_B92_BOB)[np.asarray(bits, dtype=np.intp)]
    return np.asarray(_BB84_BOB)[np.asarray(bases, dtype=np.intp)]
