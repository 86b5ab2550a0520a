"""Privacy amplification by random-subset parities.

The shared random binary matrix is Toeplitz: row ``i`` is the subset selected
by a window of a seeded random bit string, so ``m + n - 1`` seed bits define an
``m x n`` matrix.  The product is evaluated as a convolution, which keeps
megabit keys cheap.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .keys import KeyMaterial, KeyRole, as_bits


def toeplitz_seed(n_in: int, n_out: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 0x9A])
    return rng.integers(0, 2, size=n_in + n_out - 1, dtype=np.uint8)


def toeplitz_matrix(n_in: int, n_out: int, seed: int) -> np.ndarray:
    """Explicit matrix, ``T[i, j] = s[i - j + n_in - 1]``.  For small sizes only."""
    s = toeplitz_seed(n_in, n_out, seed)
    i = np.arange(n_out)[:, None]
    j = np.arange(n_in)[None, :]
    return s[i - j + n_in - 1]


def toeplitz_hash(bits, n_out: int, seed: int) -> np.ndarray:
    x = as_bits(bits)
    n_in = x.size
    if n_out <= 0:
        return np.zeros(0, dtype=np.uint8)
    s = toeplitz_seed(n_in, n_out, seed)
    if n_in * n_out <= 1 << 22:
        return (toeplitz_matrix(n_in, n_out, seed).astype(np.int64) @ x & 1).astype(np.uint8)
    conv = fftconvolve(s.astype(float), x.astype(float))[n_in - 1 : n_in - 1 + n_out]
    counts = np.rint(conv)
    if np.max(np.abs(conv - counts)) > 0.25:
        raise ArithmeticError("FFT convolution lost integer precision")
    return (counts.astype(np.int64) & 1).astype(np.uint8)


def privacy_amplify(key, leak_bits: int, security_margin: int, rng_seed: int) -> KeyMaterial:
    """Compress ``key`` to ``len(key) - leak_bits - security_margin`` bits."""
    source = key if isinstance(key, KeyMaterial) else None
    bits = as_bits(getattr(key, "bits", key))
    if leak_bits < 0 or security_margin < 0:
        raise ValueError("leak and margin must be non-negative")
    n_out = bits.size - int(leak_bits) - int(security_margin)
    if n_out <= 0:
        raise ValueError(
            f"no secret bits remain: {bits.size} - {leak_bits} leaked - {security_margin} margin"
        )
    out = toeplitz_hash(bits, n_out, rng_seed)
    return KeyMaterial(
        out,
        KeyRole.AMPLIFIED,
        disclosed_parity_count=source.disclosed_parity_count if source else 0,
        session_id=source.session_id if source else 0,
        hash_descriptor={"family": "toeplitz", "seed": int(rng_seed), "n_in": int(bits.size), "n_out": int(n_out)},
    )
