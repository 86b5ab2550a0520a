"""B92 and BB84 key generation: preparation, transmission, interpretation and sifting.

Alice's and Bob's random settings are stored packed (one bit per pulse); Bob's
detector output is stored sparsely, only at clocks where some gate fired.
Click masks use bit ``2 * window + port``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import optics
from .adversary import AttackModel, EveRecord, apply_attack
from .encoding import (
    B92_PORT,
    BB84_BIT_FOR_PORT,
    ProtocolKind,
    alice_phases,
    b92_alice_phase,
    b92_bob_phase,
    bb84_alice_phase,
    bb84_bob_phase,
    bob_phases,
)
from .optics import DetectionEvent, OpticsConfig, Port, Window

DEFAULT_BATCH = 1 << 19

NO_CLICK = -1
AMBIGUOUS = -2


def cell_bit(window: Window, port: Port) -> int:
    return 1 << (2 * int(window) + int(port))


CENTRAL_C = cell_bit(Window.CENTRAL, Port.CONSTRUCTIVE)
CENTRAL_D = cell_bit(Window.CENTRAL, Port.DESTRUCTIVE)
_BIT_WEIGHTS = (1 << np.arange(6)).astype(np.uint8).reshape(3, 2)


def masks_from_cells(cells: np.ndarray) -> np.ndarray:
    """Pack boolean ``(N, 3, 2)`` cell arrays into ``uint8`` masks."""
    return (cells.astype(np.uint8) * _BIT_WEIGHTS).sum(axis=(1, 2)).astype(np.uint8)


# ------------------------------------------------------------------ interpretation

def b92_interpret(events: Iterable[DetectionEvent]) -> bool:
    """Y (True) iff the B92 detector fired in the central window."""
    return any(e.window == Window.CENTRAL and e.port == B92_PORT for e in events)


def bb84_outcome(events: Iterable[DetectionEvent]) -> int:
    """Bit, ``NO_CLICK`` or ``AMBIGUOUS`` (both central detectors fired)."""
    ports = {e.port for e in events if e.window == Window.CENTRAL}
    if not ports:
        return NO_CLICK
    if len(ports) == 2:
        return AMBIGUOUS
    return BB84_BIT_FOR_PORT[ports.pop()]


def bb84_interpret(events: Iterable[DetectionEvent]) -> int | None:
    out = bb84_outcome(events)
    return out if out >= 0 else None


def interpret_masks(kind: ProtocolKind, masks: np.ndarray) -> np.ndarray:
    """Vectorised interpretation.  B92: 1 for Y, 0 for N.  BB84: bit or a negative code."""
    masks = np.asarray(masks, dtype=np.uint8)
    c = (masks & CENTRAL_C) != 0
    d = (masks & CENTRAL_D) != 0
    if ProtocolKind(kind) == ProtocolKind.B92:
        return (c if B92_PORT == Port.CONSTRUCTIVE else d).astype(np.int8)
    out = np.full(masks.shape, NO_CLICK, dtype=np.int8)
    out[c & ~d] = BB84_BIT_FOR_PORT[Port.CONSTRUCTIVE]
    out[d & ~c] = BB84_BIT_FOR_PORT[Port.DESTRUCTIVE]
    out[c & d] = AMBIGUOUS
    return out


# ------------------------------------------------------------------ party settings

@dataclass
class PartySettings:
    """A party's random choices for every pulse, packed."""

    kind: ProtocolKind
    n_pulses: int
    bits_packed: np.ndarray
    bases_packed: np.ndarray | None = None

    def bits(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        return _unpack_range(self.bits_packed, start, self.n_pulses if stop is None else stop)

    def bases(self, start: int = 0, stop: int | None = None) -> np.ndarray | None:
        if self.bases_packed is None:
            return None
        return _unpack_range(self.bases_packed, start, self.n_pulses if stop is None else stop)

    def bits_at(self, indices: np.ndarray) -> np.ndarray:
        return _gather(self.bits_packed, indices)

    def bases_at(self, indices: np.ndarray) -> np.ndarray | None:
        return None if self.bases_packed is None else _gather(self.bases_packed, indices)


def _unpack_range(packed: np.ndarray, start: int, stop: int) -> np.ndarray:
    lo, hi = start // 8, -(-stop // 8)
    return np.unpackbits(packed[lo:hi])[start - 8 * lo : stop - 8 * lo]


def _gather(packed: np.ndarray, indices: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    return ((packed[indices >> 3] >> (7 - (indices & 7))) & 1).astype(np.uint8)


def _random_packed(rng: np.random.Generator, n: int) -> np.ndarray:
    chunks = []
    for start in range(0, n, 1 << 23):
        m = min(1 << 23, n - start)
        chunks.append(np.packbits(rng.integers(0, 2, size=m, dtype=np.uint8)))
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)


def prepare_party(kind: ProtocolKind, n_pulses: int, seed: int, role: str) -> PartySettings:
    """Draw bits (and bases for BB84) from the party's own seeded generator.

    B92 Bob draws his bit per pulse; BB84 Bob draws only a basis.
    """
    kind = ProtocolKind(kind)
    rng = np.random.default_rng([int(seed), 0xB0B if role == "bob" else 0xA11])
    if kind == ProtocolKind.B92:
        return PartySettings(kind, n_pulses, _random_packed(rng, n_pulses))
    if role == "bob":
        return PartySettings(kind, n_pulses, np.zeros((n_pulses + 7) // 8, np.uint8), _random_packed(rng, n_pulses))
    bits = _random_packed(rng, n_pulses)
    return PartySettings(kind, n_pulses, bits, _random_packed(rng, n_pulses))


def settings_from_arrays(kind: ProtocolKind, bits, bases=None) -> PartySettings:
    bits = np.asarray(bits, dtype=np.uint8)
    return PartySettings(
        ProtocolKind(kind),
        bits.size,
        np.packbits(bits),
        None if bases is None else np.packbits(np.asarray(bases, dtype=np.uint8)),
    )


# ------------------------------------------------------------------ quantum channel

@dataclass
class Detections:
    """What Bob's hardware reports: clocks where any gate fired and the click mask."""

    n_pulses: int
    clocks: np.ndarray
    masks: np.ndarray

    def events(self, dark_masks: np.ndarray | None = None) -> Iterator[DetectionEvent]:
        for k, (clock, mask) in enumerate(zip(self.clocks, self.masks)):
            for w in Window:
                for p in Port:
                    bit = cell_bit(w, p)
                    if mask & bit:
                        dark = bool(dark_masks[k] & bit) if dark_masks is not None else False
                        yield DetectionEvent(int(clock), p, w, dark)


@dataclass
class ChannelOracle:
    """Ground truth the protocol logic never sees."""

    dark_masks: np.ndarray
    photon_counts: np.ndarray  # photons reaching Bob's side at each detection clock
    counters: dict
    eve: EveRecord


def _new_counters() -> dict:
    return {
        "pulses": 0,
        "nonempty_pulses": 0,
        "clicks": np.zeros((3, 2), dtype=np.int64),
        "signal_clicks": np.zeros((3, 2), dtype=np.int64),
        "dark_clicks": np.zeros((3, 2), dtype=np.int64),
        "multiclick_pulses": 0,
    }


def run_channel(
    kind: ProtocolKind,
    alice: PartySettings,
    bob: PartySettings,
    config: OpticsConfig,
    channel_seed: int,
    attack: AttackModel | None = None,
    eve_seed: int = 0,
    batch_size: int = DEFAULT_BATCH,
) -> tuple[Detections, ChannelOracle]:
    """Send every pulse through the (optionally attacked) channel to Bob's detectors."""
    kind = ProtocolKind(kind)
    n = alice.n_pulses
    if bob.n_pulses != n:
        raise ValueError("Alice and Bob disagree on the number of pulses")
    attack = attack or AttackModel()
    chan_rng = optics.lane_rng(channel_seed, 0xC4)
    eve_rng = optics.lane_rng(eve_seed, 0xE7E) if attack.active else None
    counters = _new_counters()
    eve = EveRecord()
    clocks, masks, darks, photons = [], [], [], []

    for start in range(0, n, batch_size):
        stop = min(n, start + batch_size)
        a_bits = alice.bits(start, stop)
        a_bases = alice.bases(start, stop)
        phi_a = alice_phases(kind, a_bits, a_bases)
        phi_b = bob_phases(kind, bob.bits(start, stop), bob.bases(start, stop))
        counts = optics.sample_photon_counts(config.source, stop - start, chan_rng)
        phi_a, counts, eve_batch = apply_attack(
            attack, kind, phi_a, counts, a_bits.astype(np.int8), None if a_bases is None else a_bases.astype(np.int8), eve_rng
        )
        batch = optics.simulate_pulses(phi_a, phi_b, counts, config, chan_rng)
        clicked = batch.clicks
        counters["pulses"] += stop - start
        counters["nonempty_pulses"] += int(np.count_nonzero(counts))
        counters["clicks"] += clicked.sum(axis=0)
        counters["signal_clicks"] += batch.signal.sum(axis=0)
        counters["dark_clicks"] += batch.dark.sum(axis=0)
        counters["multiclick_pulses"] += int(np.count_nonzero(clicked[:, :, B92_PORT].sum(axis=1) >= 2))
        m = masks_from_cells(clicked)
        any_click = m != 0
        sel = np.flatnonzero(any_click)
        clocks.append(sel + start)
        masks.append(m[sel])
        darks.append(masks_from_cells(batch.dark[sel]))
        photons.append(counts[sel].astype(np.int32))
        if attack.active:
            eve.absorb(eve_batch, a_bits.astype(np.int8), any_click, start)

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    det = Detections(n, cat(clocks, np.int64), cat(masks, np.uint8))
    oracle = ChannelOracle(cat(darks, np.uint8), cat(photons, np.int32), counters, eve)
    return det, oracle


# ------------------------------------------------------------------ Bob's records and sifting

@dataclass
class BitRecord:
    clock_index: int
    alice_bit: int
    bob_bit: int | None
    detected: bool
    alice_basis: int | None = None
    bob_basis: int | None = None
    port: Port | None = None
    window: Window | None = None


@dataclass
class BobRecords:
    """Bob's settings plus his interpreted outcome at every clock that clicked."""

    settings: PartySettings
    clocks: np.ndarray
    outcome: np.ndarray

    @property
    def kind(self) -> ProtocolKind:
        return self.settings.kind

    @property
    def n_pulses(self) -> int:
        return self.settings.n_pulses

    @property
    def ambiguous(self) -> int:
        return int(np.count_nonzero(self.outcome == AMBIGUOUS))


def bob_records(settings: PartySettings, detections: Detections) -> BobRecords:
    return BobRecords(settings, detections.clocks, interpret_masks(settings.kind, detections.masks))


@dataclass
class BobReport:
    """Bob's public announcement: indices (and BB84 bases), never bit values."""

    indices: np.ndarray
    bases: np.ndarray | None = None


def bob_report(records: BobRecords) -> BobReport:
    if records.kind == ProtocolKind.B92:
        return BobReport(records.clocks[records.outcome == 1])
    idx = records.clocks[records.outcome >= 0]
    return BobReport(idx, records.settings.bases_at(idx))


@dataclass
class SiftedKey:
    bits: np.ndarray
    indices: np.ndarray
    role: str = "sifted"

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.bits.size != self.indices.size:
            raise ValueError("sifted key needs exactly one index per bit")
        if self.indices.size > 1 and np.any(np.diff(self.indices) <= 0):
            raise ValueError("sifted indices must be strictly increasing")

    def __len__(self) -> int:
        return int(self.bits.size)


def _check_indices(indices: np.ndarray, n_pulses: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size:
        if indices.min() < 0 or indices.max() >= n_pulses:
            raise IndexError("reported index outside the session")
        if np.any(np.diff(indices) == 0) or np.unique(indices).size != indices.size:
            raise ValueError("duplicate index in report")
        if np.any(np.diff(indices) < 0):
            raise ValueError("report indices must be increasing")
    return indices


def alice_kept_indices(alice: PartySettings, report: BobReport) -> np.ndarray:
    """Indices Alice confirms: all of them for B92, matching bases for BB84."""
    idx = _check_indices(report.indices, alice.n_pulses)
    if alice.kind == ProtocolKind.B92:
        return idx
    if report.bases is None or report.bases.size != idx.size:
        raise ValueError("BB84 report needs one basis per index")
    return idx[alice.bases_at(idx) == report.bases]


def alice_sift(alice: PartySettings, kept: np.ndarray) -> SiftedKey:
    kept = _check_indices(kept, alice.n_pulses)
    return SiftedKey(alice.bits_at(kept), kept)


def bob_sift(records: BobRecords, kept: np.ndarray) -> SiftedKey:
    kept = _check_indices(kept, records.n_pulses)
    if records.kind == ProtocolKind.B92:
        return SiftedKey(records.settings.bits_at(kept), kept)
    pos = np.searchsorted(records.clocks, kept)
    if kept.size and (np.any(pos >= records.clocks.size) or np.any(records.clocks[np.minimum(pos, records.clocks.size - 1)] != kept)):
        raise ValueError("kept index without a detection")
    bits = records.outcome[pos]
    if np.any(bits < 0):
        raise ValueError("kept index without a conclusive detection")
    return SiftedKey(bits.astype(np.uint8), kept)


def sift(kind: ProtocolKind, alice: PartySettings, bob: BobRecords) -> tuple[SiftedKey, SiftedKey]:
    """In-process sifting (both parties' records in hand)."""
    if ProtocolKind(kind) != alice.kind or alice.kind != bob.kind:
        raise ValueError("protocol kind mismatch")
    kept = alice_kept_indices(alice, bob_report(bob))
    return alice_sift(alice, kept), bob_sift(bob, kept)


def bit_records(
    alice: PartySettings, bob: BobRecords, detections: Detections, start: int = 0, stop: int | None = None
) -> list[BitRecord]:
    """Per-pulse view for small runs and inspection."""
    stop = alice.n_pulses if stop is None else stop
    a_bits = alice.bits(start, stop)
    a_bases = alice.bases(start, stop)
    b_bits = bob.settings.bits(start, stop)
    b_bases = bob.settings.bases(start, stop)
    by_clock = {int(c): (int(o), int(m)) for c, o, m in zip(bob.clocks, bob.outcome, detections.masks)}
    out = []
    for k, clock in enumerate(range(start, stop)):
        outcome, mask = by_clock.get(clock, (NO_CLICK if alice.kind == ProtocolKind.BB84 else 0, 0))
        window = port = None
        for w in (Window.CENTRAL, Window.PROMPT, Window.DELAYED):
            for p in Port:
                if mask & cell_bit(w, p) and window is None:
                    window, port = w, p
        if alice.kind == ProtocolKind.B92:
            out.append(BitRecord(clock, int(a_bits[k]), int(b_bits[k]), bool(outcome == 1), port=port, window=window))
        else:
            out.append(
                BitRecord(
                    clock,
                    int(a_bits[k]),
                    int(outcome) if outcome >= 0 else None,
                    outcome >= 0,
                    int(a_bases[k]),
                    int(b_bases[k]),
                    port,
                    window,
                )
            )
    return out


# ------------------------------------------------------------------ single-process session

@dataclass
class Seeds:
    alice: int = 1
    bob: int = 2
    eve: int = 3
    channel: int = 4
    auth: int = 5


@dataclass
class QuantumRun:
    kind: ProtocolKind
    alice: PartySettings
    bob: BobRecords
    detections: Detections
    oracle: ChannelOracle


def transmit(
    kind: ProtocolKind,
    n_pulses: int,
    config: OpticsConfig,
    attack: AttackModel | None = None,
    seeds: Seeds | None = None,
    batch_size: int = DEFAULT_BATCH,
) -> QuantumRun:
    seeds = seeds or Seeds()
    alice = prepare_party(kind, n_pulses, seeds.alice, "alice")
    bob_settings = prepare_party(kind, n_pulses, seeds.bob, "bob")
    det, oracle = run_channel(kind, alice, bob_settings, config, seeds.channel, attack, seeds.eve, batch_size)
    return QuantumRun(ProtocolKind(kind), alice, bob_records(bob_settings, det), det, oracle)


def deciding_dark(kind: ProtocolKind, run: QuantumRun, indices: np.ndarray) -> np.ndarray:
    """Oracle: was the click that produced each sifted bit a dark count?"""
    pos = np.searchsorted(run.detections.clocks, indices)
    dark = run.oracle.dark_masks[pos]
    if ProtocolKind(kind) == ProtocolKind.B92:
        return (dark & cell_bit(Window.CENTRAL, B92_PORT)) != 0
    masks = run.detections.masks[pos]
    port_bit = np.where((masks & CENTRAL_C) != 0, CENTRAL_C, CENTRAL_D)
    return (dark & port_bit) != 0


def sifted_oracle(run: QuantumRun, alice_key: SiftedKey, bob_key: SiftedKey, pulse_rate: float) -> dict:
    """Ground-truth annotations: error positions, dark share, Eve's knowledge."""
    from .adversary import eve_info_fraction

    errors = np.flatnonzero(alice_key.bits != bob_key.bits)
    dark = deciding_dark(run.kind, run, alice_key.indices) if len(alice_key) else np.zeros(0, bool)
    n = len(alice_key)
    duration = run.alice.n_pulses / pulse_rate if pulse_rate else math.inf
    c = run.oracle.counters
    total_clicks = int(c["clicks"].sum())
    return {
        "sifted_bits": n,
        "error_positions": errors.tolist(),
        "errors": int(errors.size),
        "ber": errors.size / n if n else 0.0,
        "dark_errors": int(np.count_nonzero(dark[errors])) if errors.size else 0,
        "dark_error_fraction": float(np.mean(dark[errors])) if errors.size else 0.0,
        "dark_sifted_fraction": float(np.mean(dark)) if n else 0.0,
        "dark_click_fraction": float(c["dark_clicks"].sum() / total_clicks) if total_clicks else 0.0,
        "duration_s": duration,
        "sifted_rate_hz": n / duration if duration else 0.0,
        "eve_info_fraction": eve_info_fraction(run.oracle.eve, alice_key.indices, alice_key.bits),
        "eve_totals": dict(run.oracle.eve.totals),
    }


def public_counters(run: QuantumRun) -> dict:
    c = run.oracle.counters
    return {
        "pulses": int(c["pulses"]),
        "clicks": c["clicks"].tolist(),
        "multiclick_pulses": int(c["multiclick_pulses"]),
        "detection_clocks": int(run.detections.clocks.size),
        "ambiguous": run.bob.ambiguous,
    }


def run_session(
    kind: ProtocolKind,
    n_pulses: int,
    config: OpticsConfig,
    attack: AttackModel | None = None,
    seeds: Seeds | None = None,
    batch_size: int = DEFAULT_BATCH,
):
    """Stages 2-3: transmit, interpret and sift through authenticated public messages.

    Returns a :class:`fiberqkd.session.transcript.SessionTranscript` whose
    ``keys`` hold the sifted keys and whose ``oracle`` holds ground truth.
    """
    from .session.channel import PublicChannel, pool_seed
    from .session.transcript import SessionTranscript
    from .session.transport import loopback_pair
    from .session.wire import MsgType
    from .postprocessing.auth import AuthKeyPool

    kind = ProtocolKind(kind)
    seeds = seeds or Seeds()
    run = transmit(kind, n_pulses, config, attack, seeds, batch_size)

    ta, tb = loopback_pair(timeout=1.0)
    budget = 64 * 192

    def pools():
        return AuthKeyPool.from_seed(pool_seed(seeds.auth, "a2b"), budget), AuthKeyPool.from_seed(
            pool_seed(seeds.auth, "b2a"), budget
        )

    a2b, b2a = pools()
    alice_ch = PublicChannel(ta, "alice", seeds.auth, send_pool=a2b, recv_pool=b2a)
    a2b_b, b2a_b = pools()
    bob_ch = PublicChannel(tb, "bob", seeds.auth, send_pool=b2a_b, recv_pool=a2b_b)

    report = bob_report(run.bob)
    bob_ch.send(MsgType.INDEX_LIST, purpose="detected", indices=report.indices)
    if kind == ProtocolKind.BB84:
        bob_ch.send(MsgType.BASIS_LIST, bases=report.bases)
    got = alice_ch.receive(MsgType.INDEX_LIST)
    bases = alice_ch.receive(MsgType.BASIS_LIST)["bases"] if kind == ProtocolKind.BB84 else None
    kept = alice_kept_indices(run.alice, BobReport(got["indices"], bases))
    alice_ch.send(MsgType.INDEX_LIST, purpose="kept", indices=kept)
    bob_kept = bob_ch.receive(MsgType.INDEX_LIST)["indices"]

    alice_key = alice_sift(run.alice, kept)
    bob_key = bob_sift(run.bob, bob_kept)
    oracle = sifted_oracle(run, alice_key, bob_key, config.source.pulse_rate)
    return SessionTranscript(
        config={"kind": kind.value, "n_pulses": int(n_pulses)},
        messages=list(alice_ch.log),
        counters=public_counters(run),
        digests={},
        keys={"alice_sifted": alice_key, "bob_sifted": bob_key},
        oracle=oracle,
        run=run,
    )


__all__ = [
    "AMBIGUOUS",
    "BitRecord",
    "BobRecords",
    "BobReport",
    "Detections",
    "NO_CLICK",
    "PartySettings",
    "ProtocolKind",
    "QuantumRun",
    "Seeds",
    "SiftedKey",
    "alice_sift",
    "b92_alice_phase",
    "b92_bob_phase",
    "b92_interpret",
    "bb84_alice_phase",
    "bb84_bob_phase",
    "bb84_interpret",
    "bob_sift",
    "interpret_masks",
    "prepare_party",
    "run_channel",
    "run_session",
    "sift",
    "transmit",
]
