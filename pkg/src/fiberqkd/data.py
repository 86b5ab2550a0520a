"""Reference bit strings: 128 sifted B92 bits as recorded by Alice and Bob."""
from __future__ import annotations

import numpy as np

FIG7_ALICE = (
    "00100000 10011100 11111110 10010111 01110110 00000001 00101000 01111010 "
    "00010011 11001100 00111101 01101000 00110111 10110011 11101010 11011100"
)
FIG7_BOB = (
    "00101000 10011100 11111110 10010111 01110111 00000001 00101100 01111110 "
    "00010011 11011100 00111101 01101000 00100111 10110011 01101010 11011100"
)
FIG7_STATED_ERRORS = 6  # the count given in the accompanying text


def parse_bits(text: str) -> np.ndarray:
    digits = [c for c in text if c in "01"]
    return np.array(digits, dtype=np.uint8)


def fig7_keys() -> tuple[np.ndarray, np.ndarray]:
    return parse_bits(FIG7_ALICE), parse_bits(FIG7_BOB)


def fig7_mismatches() -> np.ndarray:
    a, b = fig7_keys()
    return np.flatnonzero(a != b)
