"""Two-dimensional block-parity error correction.

Each pass lays the key out (padded with public zeros, permuted from the second
pass on) as a stack of ``rows x cols`` matrices.  Both sides publish row and
column parities.  Within a matrix:

* exactly one mismatched row and one mismatched column: Bob flips the bit at
  their intersection;
* several mismatched rows and columns: every intersection cell is ambiguous and
  is discarded by both sides;
* one row and one column chosen from the shared seed are then discarded as the
  rudimentary privacy step.

After each pass the parities of ``verify_count`` fresh random subsets are
compared; agreement ends the procedure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimate import ber_from_parity_mismatch
from .keys import KeyMaterial, KeyRole, as_bits

DEFAULT_DIMS = (8, 8)
VERIFY_SUBSETS = 32


class ReconciliationError(RuntimeError):
    """Passes exhausted while parities still disagree.  Keys must be discarded."""

    def __init__(self, message: str, passes: int, disclosed: int):
        super().__init__(message)
        self.passes = passes
        self.disclosed = disclosed


@dataclass(frozen=True)
class PassPlan:
    pass_index: int
    n_bits: int
    rows: int
    cols: int
    n_blocks: int
    order: np.ndarray  # matrix cell -> source position; >= n_bits means padding
    drop_rows: np.ndarray
    drop_cols: np.ndarray

    @property
    def block_size(self) -> int:
        return self.rows * self.cols


@dataclass
class ParityBlockReport:
    rows: int
    cols: int
    row_parities: np.ndarray
    col_parities: np.ndarray
    pass_index: int

    @property
    def n_blocks(self) -> int:
        return self.row_parities.size // self.rows

    @property
    def size(self) -> int:
        return int(self.row_parities.size + self.col_parities.size)


@dataclass
class PassActions:
    flips: np.ndarray  # source positions Bob flips
    keep: np.ndarray  # boolean over source positions
    row_mismatch: int
    col_mismatch: int


def plan_pass(n_bits: int, dims: tuple[int, int], seed: int, pass_index: int) -> PassPlan:
    rows, cols = dims
    if rows < 2 or cols < 2:
        raise ValueError("block dimensions must be at least 2x2")
    size = rows * cols
    n_blocks = -(-n_bits // size) if n_bits else 0
    padded = n_blocks * size
    rng = np.random.default_rng([int(seed), int(pass_index)])
    order = np.arange(padded) if pass_index == 0 else rng.permutation(padded)
    return PassPlan(
        pass_index=pass_index,
        n_bits=n_bits,
        rows=rows,
        cols=cols,
        n_blocks=n_blocks,
        order=order,
        drop_rows=rng.integers(0, rows, size=n_blocks),
        drop_cols=rng.integers(0, cols, size=n_blocks),
    )


def arrange(bits: np.ndarray, plan: PassPlan) -> np.ndarray:
    padded = np.zeros(plan.n_blocks * plan.block_size, dtype=np.uint8)
    padded[: plan.n_bits] = bits
    return padded[plan.order].reshape(plan.n_blocks, plan.rows, plan.cols)


def block_parities(bits, plan: PassPlan) -> ParityBlockReport:
    m = arrange(as_bits(bits), plan)
    return ParityBlockReport(
        rows=plan.rows,
        cols=plan.cols,
        row_parities=(m.sum(axis=2) & 1).astype(np.uint8).ravel(),
        col_parities=(m.sum(axis=1) & 1).astype(np.uint8).ravel(),
        pass_index=plan.pass_index,
    )


def resolve(alice: ParityBlockReport, bob: ParityBlockReport, plan: PassPlan) -> PassActions:
    """Decide flips and discards from the two parity reports.

    Deterministic in its inputs, so both parties derive identical actions.
    """
    nb, r, c = plan.n_blocks, plan.rows, plan.cols
    rm = (alice.row_parities != bob.row_parities).reshape(nb, r)
    cm = (alice.col_parities != bob.col_parities).reshape(nb, c)
    n_rm = rm.sum(axis=1)
    n_cm = cm.sum(axis=1)

    unique = (n_rm == 1) & (n_cm == 1)
    ambiguous = (n_rm > 0) & (n_cm > 0) & ~unique

    discard = rm[:, :, None] & cm[:, None, :] & ambiguous[:, None, None]
    blocks = np.arange(nb)
    discard[blocks, plan.drop_rows, :] = True
    discard[blocks, :, plan.drop_cols] = True

    ub = np.flatnonzero(unique)
    flip_cells = ub * r * c + rm[ub].argmax(axis=1) * c + cm[ub].argmax(axis=1)
    flip_src = plan.order[flip_cells]
    flip_src = flip_src[flip_src < plan.n_bits]

    src = plan.order[discard.ravel()]
    keep = np.ones(plan.n_bits, dtype=bool)
    keep[src[src < plan.n_bits]] = False
    return PassActions(
        flips=np.sort(flip_src),
        keep=keep,
        row_mismatch=int(rm.sum()),
        col_mismatch=int(cm.sum()),
    )


def apply_pass(bits, actions: PassActions, correct: bool = False) -> np.ndarray:
    out = as_bits(bits).copy()
    if correct and actions.flips.size:
        out[actions.flips] ^= 1
    return out[actions.keep]


def verification_parities(bits, seed: int, count: int = VERIFY_SUBSETS) -> np.ndarray:
    """Parities of ``count`` random subsets drawn from a shared seed."""
    bits = as_bits(bits)
    rng = np.random.default_rng([int(seed), 0x7E51])
    out = np.zeros(count, dtype=np.uint8)
    for i in range(count):
        mask = rng.integers(0, 2, size=bits.size, dtype=np.uint8)
        out[i] = int(np.dot(mask, bits.astype(np.int64)) & 1)
    return out


def syndrome_ber(alice: ParityBlockReport, bob: ParityBlockReport) -> float:
    """Error-rate estimate from the fraction of mismatched row/column parities."""
    if alice.row_parities.size == 0:
        return 0.0
    row_frac = float(np.mean(alice.row_parities != bob.row_parities))
    col_frac = float(np.mean(alice.col_parities != bob.col_parities))
    return 0.5 * (
        ber_from_parity_mismatch(row_frac, alice.cols) + ber_from_parity_mismatch(col_frac, alice.rows)
    )


@dataclass
class ReconciliationResult:
    alice: KeyMaterial
    bob: KeyMaterial
    parity_disclosed: int
    verification_disclosed: int
    dropped: int
    passes: int
    corrected: int
    ber_estimate: float
    error_history: list[int] = field(default_factory=list)

    @property
    def disclosed(self) -> int:
        return self.parity_disclosed + self.verification_disclosed


def reconcile_block_parity(
    alice_key,
    bob_key,
    block_dims: tuple[int, int] = DEFAULT_DIMS,
    max_passes: int = 6,
    rng=None,
    channel: Callable[[str, object], None] | None = None,
    verify_count: int = VERIFY_SUBSETS,
) -> ReconciliationResult:
    """Run the full multi-pass procedure on two in-process keys.

    ``channel`` is called as ``channel(sender, report)`` for every public
    disclosure, which lets callers log or transport them.  The returned
    ``error_history`` is an oracle view (simulation only).
    """
    session_id = getattr(alice_key, "session_id", 0)
    a = as_bits(getattr(alice_key, "bits", alice_key))
    b = as_bits(getattr(bob_key, "bits", bob_key))
    if a.size != b.size:
        raise ValueError(f"key length mismatch: {a.size} != {b.size}")
    rng = np.random.default_rng(rng)
    emit = channel or (lambda sender, report: None)

    history = [int(np.count_nonzero(a != b))]
    parity_disclosed = verification_disclosed = dropped = corrected = 0
    ber_estimate = None
    for p in range(max_passes):
        plan = plan_pass(a.size, block_dims, int(rng.integers(2**63)), p)
        rep_a = block_parities(a, plan)
        rep_b = block_parities(b, plan)
        emit("alice", rep_a)
        emit("bob", rep_b)
        parity_disclosed += rep_a.size
        if ber_estimate is None:
            ber_estimate = syndrome_ber(rep_a, rep_b)
        actions = resolve(rep_a, rep_b, plan)
        corrected += int(actions.flips.size)
        dropped += int(np.count_nonzero(~actions.keep))
        a = apply_pass(a, actions)
        b = apply_pass(b, actions, correct=True)
        history.append(int(np.count_nonzero(a != b)))

        vseed = int(rng.integers(2**63))
        va = verification_parities(a, vseed, verify_count)
        vb = verification_parities(b, vseed, verify_count)
        emit("alice", va)
        verification_disclosed += verify_count
        if np.array_equal(va, vb):
            def km(bits):
                key = KeyMaterial(bits, KeyRole.RECONCILED, session_id=session_id)
                key.disclose(parity_disclosed + verification_disclosed)
                return key

            return ReconciliationResult(
                alice=km(a),
                bob=km(b),
                parity_disclosed=parity_disclosed,
                verification_disclosed=verification_disclosed,
                dropped=dropped,
                passes=p + 1,
                corrected=corrected,
                ber_estimate=ber_estimate,
                error_history=history,
            )
    raise ReconciliationError(
        f"parities still disagree after {max_passes} passes",
        passes=max_passes,
        disclosed=parity_disclosed + verification_disclosed,
    )
