"""Error-rate estimation and the stage-5 Eve-knowledge model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keys import as_bits


@dataclass
class BerEstimate:
    rate: float
    errors: int
    compared: int
    disclosed: int = 0
    # keys with the disclosed sample removed (sampled mode only)
    alice_remaining: np.ndarray | None = None
    bob_remaining: np.ndarray | None = None


def estimate_ber(alice, bob, mode: str = "oracle", fraction: float = 0.1, rng=None) -> BerEstimate:
    """Bit error rate between two equal-length keys.

    ``mode="oracle"`` compares every bit (simulation only).  ``mode="sampled"``
    publicly compares a random ``fraction`` of positions, which are then removed
    from both keys and counted as disclosed.
    """
    a = as_bits(alice)
    b = as_bits(bob)
    if a.size != b.size:
        raise ValueError(f"key length mismatch: {a.size} != {b.size}")
    if mode == "oracle":
        errors = int(np.count_nonzero(a != b))
        return BerEstimate(errors / a.size if a.size else 0.0, errors, int(a.size))
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(rng)
    k = int(round(fraction * a.size))
    picked = np.zeros(a.size, dtype=bool)
    picked[rng.choice(a.size, size=k, replace=False)] = True
    errors = int(np.count_nonzero(a[picked] != b[picked]))
    return BerEstimate(
        rate=errors / k if k else 0.0,
        errors=errors,
        compared=k,
        disclosed=k,
        alice_remaining=a[~picked],
        bob_remaining=b[~picked],
    )


def ber_from_parity_mismatch(mismatch_fraction: float, line_length: int) -> float:
    """Invert ``P(odd errors in a line) = (1 - (1 - 2e)^L) / 2`` for ``e``."""
    if line_length < 1:
        raise ValueError("line_length must be positive")
    rho = min(max(mismatch_fraction, 0.0), 0.5)
    return 0.5 * (1.0 - (1.0 - 2.0 * rho) ** (1.0 / line_length))


def eve_knowledge_fraction(ber: float) -> float:
    """Modelled fraction of the key known to Eve, ``min(1, 3 * BER)``.

    Linear intercept-resend scaling: a 25% error rate accompanies 75% knowledge.
    This is a modelling choice, not a security proof.
    """
    return min(1.0, 3.0 * max(ber, 0.0))
