"""Wegman-Carter authentication from a consumable secret-bit pool.

Each message consumes ``HASH_KEY_BITS + TAG_BITS`` fresh pool bits: a 64-bit
evaluation point and a 64-bit offset for the polynomial hash over GF(p), and a
64-bit one-time pad that masks the tag.
"""
from __future__ import annotations

import hmac
from dataclasses import dataclass, field

import numpy as np

from .keys import KeyMaterial, as_bits

FIELD_PRIME = (1 << 64) - 59  # largest prime below 2**64
HASH_KEY_BITS = 128
TAG_BITS = 64
BITS_PER_MESSAGE = HASH_KEY_BITS + TAG_BITS
BLOCK_BYTES = 7  # every block is < 2**56 < p


class PoolExhausted(RuntimeError):
    """Not enough authentication bits left; replenishment is required."""


@dataclass
class AuthKeyPool:
    bits: np.ndarray
    cursor: int = 0
    ledger: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        self.bits = as_bits(self.bits)

    @classmethod
    def from_seed(cls, seed: int, n_bits: int) -> "AuthKeyPool":
        """Pre-shared initial pool; both parties derive it from the same secret."""
        rng = np.random.default_rng([int(seed), 0xA07])
        return cls(rng.integers(0, 2, size=n_bits, dtype=np.uint8))

    @property
    def remaining(self) -> int:
        return int(self.bits.size - self.cursor)

    @property
    def consumed(self) -> int:
        return sum(n for label, n in self.ledger if label != "refill")

    def take(self, n: int, label: str = "auth") -> np.ndarray:
        if n > self.remaining:
            raise PoolExhausted(f"need {n} authentication bits, {self.remaining} left")
        out = self.bits[self.cursor : self.cursor + n]
        self.cursor += n
        self.ledger.append((label, n))
        return out

    def refill(self, bits) -> None:
        bits = as_bits(bits)
        self.bits = np.concatenate([self.bits[self.cursor :], bits])
        self.cursor = 0
        self.ledger.append(("refill", int(bits.size)))


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits).tobytes(), "big")


def poly_hash(message: bytes, point: int, offset: int) -> int:
    """``offset + sum(m_i * point^(L-i+1))`` over GF(p), with a length block."""
    acc = 0
    for i in range(0, len(message), BLOCK_BYTES):
        block = int.from_bytes(message[i : i + BLOCK_BYTES], "big")
        acc = (acc + block) * point % FIELD_PRIME
    acc = (acc + len(message)) * point % FIELD_PRIME
    return (acc + offset) % FIELD_PRIME


def forgery_bound(message_len: int) -> float:
    """Upper bound on a single forgery's success probability."""
    blocks = -(-message_len // BLOCK_BYTES) + 1
    return blocks / FIELD_PRIME


def tag_with_key(message: bytes, key_bits: np.ndarray) -> int:
    point = _bits_to_int(key_bits[:64]) % FIELD_PRIME
    offset = _bits_to_int(key_bits[64:128]) % FIELD_PRIME
    pad = _bits_to_int(key_bits[128:192])
    return poly_hash(message, point, offset) ^ pad


def authenticate(message: bytes, pool: AuthKeyPool) -> int:
    return tag_with_key(bytes(message), pool.take(BITS_PER_MESSAGE))


def verify(message: bytes, tag: int, pool: AuthKeyPool) -> bool:
    expected = tag_with_key(bytes(message), pool.take(BITS_PER_MESSAGE))
    return hmac.compare_digest(expected.to_bytes(8, "big"), int(tag).to_bytes(8, "big"))


def stage7_replenish(key, pool: AuthKeyPool, n_bits: int):
    """Move ``n_bits`` from the head of ``key`` into ``pool``.

    Returns ``(shorter_key, pool)``; the key keeps its type (array or KeyMaterial).
    """
    bits = as_bits(getattr(key, "bits", key))
    if n_bits < 0:
        raise ValueError("refill size must be non-negative")
    if n_bits > bits.size:
        raise ValueError(f"cannot refill {n_bits} bits from a {bits.size}-bit key")
    if n_bits:
        pool.refill(bits[:n_bits])
    rest = bits[n_bits:]
    if isinstance(key, KeyMaterial):
        key = KeyMaterial(
            rest,
            key.role,
            disclosed_parity_count=key.disclosed_parity_count,
            session_id=key.session_id,
            hash_descriptor=key.hash_descriptor,
            notes=dict(key.notes, refilled=int(n_bits)),
        )
        return key, pool
    return rest, pool
