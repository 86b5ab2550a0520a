"""Classical post-processing: error estimation, reconciliation, amplification, authentication."""
from .amplify import privacy_amplify, toeplitz_hash, toeplitz_matrix
from .auth import (
    BITS_PER_MESSAGE,
    AuthKeyPool,
    PoolExhausted,
    authenticate,
    forgery_bound,
    stage7_replenish,
    verify,
)
from .estimate import BerEstimate, ber_from_parity_mismatch, estimate_ber, eve_knowledge_fraction
from .keys import KeyMaterial, KeyRole, bits_from_hex, bits_to_hex, key_digest
from .reconcile import (
    ParityBlockReport,
    ReconciliationError,
    ReconciliationResult,
    reconcile_block_parity,
)

__all__ = [
    "AuthKeyPool",
    "BITS_PER_MESSAGE",
    "BerEstimate",
    "KeyMaterial",
    "KeyRole",
    "ParityBlockReport",
    "PoolExhausted",
    "ReconciliationError",
    "ReconciliationResult",
    "authenticate",
    "ber_from_parity_mismatch",
    "bits_from_hex",
    "bits_to_hex",
    "estimate_ber",
    "eve_knowledge_fraction",
    "forgery_bound",
    "key_digest",
    "privacy_amplify",
    "reconcile_block_parity",
    "stage7_replenish",
    "toeplitz_hash",
    "toeplitz_matrix",
    "verify",
]
