"""Eavesdropper strategies acting on pulses in transit.

Measurements use the two-state picture of each pulse: a phase setting ``phi``
corresponds to a linear polarisation at angle ``phi / 2``, so the probability of
passing a projective test at angle ``theta`` is ``cos^2(phi / 2 - theta)``.
This reproduces the single-interferometer detection law exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import optics
from .optics import OpticsConfig, Port, PulsePreparation
from .encoding import (
    ProtocolKind,
    b92_alice_phase,
    b92_bob_phase,
    bb84_alice_phase,
)


class AttackKind(str, enum.Enum):
    NONE = "none"
    INTERCEPT_ALICE = "intercept-alice"
    INTERCEPT_BOB = "intercept-bob"
    BEAMSPLIT = "beamsplit"


class Confidence(enum.IntEnum):
    NONE = 0
    GUESSED = 1
    CERTAIN = 2


@dataclass(frozen=True)
class AttackModel:
    kind: AttackKind = AttackKind.NONE
    fraction: float = 1.0
    resend_multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"attack fraction must lie in [0, 1], got {self.fraction}")
        if self.resend_multiplicity < 1:
            raise ValueError("resend_multiplicity must be at least 1")

    @property
    def active(self) -> bool:
        return self.kind != AttackKind.NONE


@dataclass(frozen=True)
class EveEntry:
    clock_index: int
    known_bit: int | None
    confidence: Confidence
    suppressed: bool = False


@dataclass
class EveBatch:
    attacked: np.ndarray
    known_bit: np.ndarray  # int8, -1 when nothing learned
    confidence: np.ndarray  # int8 Confidence values
    suppressed: np.ndarray


@dataclass
class EveRecord:
    """Eve's knowledge, retained for clocks that reached Bob's detectors.

    Whole-run totals are kept in ``totals`` so memory stays bounded on
    long runs.
    """

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    known_bit: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    confidence: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    suppressed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    totals: dict[str, int] = field(
        default_factory=lambda: {"attacked": 0, "suppressed": 0, "known": 0, "certain": 0, "correct": 0}
    )

    def absorb(self, batch: EveBatch, alice_bits: np.ndarray, keep: np.ndarray, clock_offset: int) -> None:
        known = batch.known_bit >= 0
        self.totals["attacked"] += int(batch.attacked.sum())
        self.totals["suppressed"] += int(batch.suppressed.sum())
        self.totals["known"] += int(known.sum())
        self.totals["certain"] += int((batch.confidence == Confidence.CERTAIN).sum())
        self.totals["correct"] += int((known & (batch.known_bit == alice_bits)).sum())
        sel = np.flatnonzero(keep & batch.attacked)
        if sel.size:
            self.indices = np.concatenate([self.indices, sel + clock_offset])
            self.known_bit = np.concatenate([self.known_bit, batch.known_bit[sel]])
            self.confidence = np.concatenate([self.confidence, batch.confidence[sel]])
            self.suppressed = np.concatenate([self.suppressed, batch.suppressed[sel]])

    def lookup(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Known bit and confidence at ``indices`` (unknown where not attacked)."""
        indices = np.asarray(indices, dtype=np.int64)
        bits = np.full(indices.size, -1, dtype=np.int8)
        conf = np.zeros(indices.size, dtype=np.int8)
        if self.indices.size and indices.size:
            order = np.argsort(self.indices)
            srt = self.indices[order]
            pos = np.clip(np.searchsorted(srt, indices), 0, srt.size - 1)
            hit = srt[pos] == indices
            bits[hit] = self.known_bit[order[pos[hit]]]
            conf[hit] = self.confidence[order[pos[hit]]]
        return bits, conf

    def entries(self):
        for i, b, c, s in zip(self.indices, self.known_bit, self.confidence, self.suppressed):
            yield EveEntry(int(i), None if b < 0 else int(b), Confidence(int(c)), bool(s))


def _pass_prob(phi_state, theta):
    return np.cos(np.asarray(phi_state) / 2.0 - theta) ** 2


def _b92_alice_basis(phi_a, rng):
    n = phi_a.size
    j = rng.integers(0, 2, size=n, dtype=np.int8)
    theta = np.where(j == 0, b92_alice_phase(0), b92_alice_phase(1)) / 2.0
    parallel = rng.random(n) < _pass_prob(phi_a, theta)
    guess = np.where(parallel, j, 1 - j).astype(np.int8)
    conf = np.where(parallel, Confidence.GUESSED, Confidence.CERTAIN).astype(np.int8)
    resend = np.where(guess == 0, b92_alice_phase(0), b92_alice_phase(1))
    return guess, conf, resend


def _bb84_alice_basis(phi_a, alice_bases, rng):
    n = phi_a.size
    beta = rng.integers(0, 2, size=n, dtype=np.int8)
    theta = np.where(beta == 0, bb84_alice_phase(0, 0), bb84_alice_phase(1, 0)) / 2.0
    guess = (rng.random(n) >= _pass_prob(phi_a, theta)).astype(np.int8)
    # bases are announced during sifting, so Eve learns which guesses were sure
    conf = np.where(beta == alice_bases, Confidence.CERTAIN, Confidence.GUESSED).astype(np.int8)
    resend = np.array([[bb84_alice_phase(b, x) for x in (0, 1)] for b in (0, 1)])[beta, guess]
    return guess, conf, resend


def apply_attack(
    attack: AttackModel,
    kind: ProtocolKind,
    phi_a: np.ndarray,
    counts: np.ndarray,
    alice_bits: np.ndarray,
    alice_bases: np.ndarray | None,
    rng: np.random.Generator | None,
):
    """Transform a batch of pulses.  Returns ``(phi_a, counts, EveBatch)``.

    ``alice_bits`` is used only to fill the oracle record for beamsplitting,
    where Eve's stored photon yields the bit once the encoding is public.
    """
    n = counts.size
    batch = EveBatch(
        attacked=np.zeros(n, dtype=bool),
        known_bit=np.full(n, -1, dtype=np.int8),
        confidence=np.zeros(n, dtype=np.int8),
        suppressed=np.zeros(n, dtype=bool),
    )
    if not attack.active:
        return phi_a, counts, batch

    phi_a = phi_a.copy()
    counts = counts.copy()
    chosen = rng.random(n) < attack.fraction

    if attack.kind == AttackKind.BEAMSPLIT:
        hit = np.flatnonzero(chosen & (counts >= 2))
        counts[hit] -= 1
        batch.attacked[hit] = True
        batch.known_bit[hit] = alice_bits[hit]
        batch.confidence[hit] = Confidence.CERTAIN
        return phi_a, counts, batch

    hit = np.flatnonzero(chosen & (counts >= 1))
    batch.attacked[hit] = True
    if attack.kind == AttackKind.INTERCEPT_ALICE:
        if kind == ProtocolKind.B92:
            guess, conf, resend = _b92_alice_basis(phi_a[hit], rng)
        else:
            guess, conf, resend = _bb84_alice_basis(phi_a[hit], alice_bases[hit], rng)
        batch.known_bit[hit] = guess
        batch.confidence[hit] = conf
        phi_a[hit] = resend
        return phi_a, counts, batch

    if attack.kind == AttackKind.INTERCEPT_BOB:
        if kind != ProtocolKind.B92:
            raise ValueError("the Bob's-basis attack applies to B92 only")
        e = rng.integers(0, 2, size=hit.size, dtype=np.int8)
        theta = np.where(e == 0, b92_bob_phase(0), b92_bob_phase(1)) / 2.0
        passed = rng.random(hit.size) < _pass_prob(phi_a[hit], theta)
        ok = hit[passed]
        batch.known_bit[ok] = e[passed]
        batch.confidence[ok] = Confidence.CERTAIN
        phi_a[ok] = np.where(e[passed] == 0, b92_alice_phase(0), b92_alice_phase(1))
        counts[ok] = attack.resend_multiplicity
        dropped = hit[~passed]
        counts[dropped] = 0
        batch.suppressed[dropped] = True
        return phi_a, counts, batch

    raise ValueError(f"unsupported attack {attack.kind}")


def _single(pulse: PulsePreparation, attack: AttackModel, kind, alice_bit, alice_basis, rng):
    phi, cnt, b = apply_attack(
        attack,
        kind,
        np.array([pulse.phi_a]),
        np.array([pulse.photon_count]),
        np.array([alice_bit], dtype=np.int8),
        None if alice_basis is None else np.array([alice_basis], dtype=np.int8),
        rng,
    )
    known = int(b.known_bit[0])
    entry = EveEntry(pulse.clock_index, None if known < 0 else known, Confidence(int(b.confidence[0])), bool(b.suppressed[0]))
    return PulsePreparation(pulse.clock_index, float(phi[0]), int(cnt[0])), entry


def intercept_alice_basis(pulse: PulsePreparation, alice_bit: int, rng, kind=ProtocolKind.B92, alice_basis=None):
    """Measure against one of Alice's states and resend the inferred state."""
    return _single(pulse, AttackModel(AttackKind.INTERCEPT_ALICE), kind, alice_bit, alice_basis, rng)


def intercept_bob_basis(pulse: PulsePreparation, rng, resend_multiplicity: int = 1):
    """Measure with Bob's test; resend on a pass, suppress otherwise.

    Returns ``(resent pulse or None, entry)``.
    """
    resent, entry = _single(
        pulse, AttackModel(AttackKind.INTERCEPT_BOB, 1.0, resend_multiplicity), ProtocolKind.B92, -1, None, rng
    )
    return (None if entry.suppressed else resent), entry


def beamsplit(pulse: PulsePreparation, alice_bit: int, rng):
    return _single(pulse, AttackModel(AttackKind.BEAMSPLIT), ProtocolKind.B92, alice_bit, None, rng)


def eve_info_fraction(record: EveRecord, sifted_indices, alice_sifted_bits) -> float:
    """Fraction of sifted bits Eve holds: certain bits plus correct guesses."""
    sifted_indices = np.asarray(sifted_indices, dtype=np.int64)
    if sifted_indices.size == 0:
        return 0.0
    known, conf = record.lookup(sifted_indices)
    truth = np.asarray(alice_sifted_bits, dtype=np.int8)
    certain = conf == Confidence.CERTAIN
    if np.any(known[certain] != truth[certain]):
        raise AssertionError("a certain Eve bit disagrees with Alice's bit")
    correct = (known >= 0) & (known == truth)
    return float(np.count_nonzero(correct)) / sifted_indices.size


def tappable_fraction(mu: float) -> float:
    """Share of non-empty pulses a beamsplitter can tap, ``P(n >= 2 | n >= 1)``."""
    p0 = math.exp(-mu)
    return (1.0 - p0 - mu * p0) / (1.0 - p0)


# ---------------------------------------------------------------- side-peak monitor

def multiclick_fraction(clicks: np.ndarray, port: Port = Port.CONSTRUCTIVE) -> float:
    """Fraction of pulses whose detector fired in two or more time windows."""
    if clicks.shape[0] == 0:
        return 0.0
    return float(np.mean(clicks[:, :, port].sum(axis=1) >= 2))


def _window_click_probs(n_photons: int, delta_phi: float, config: OpticsConfig, port: Port) -> np.ndarray:
    w = optics.cell_weights(np.array([delta_phi]), config)[0][:, port]
    t_eta = optics.transmission(config.channel) * config.detector.efficiency
    p_signal = 1.0 - (1.0 - np.minimum(w * t_eta, 1.0)) ** n_photons
    p_dark = config.detector.dark_click_prob * optics.gated_cells(config)[:, port]
    return 1.0 - (1.0 - p_signal) * (1.0 - p_dark)


def _at_least_two(q: np.ndarray) -> float:
    none = np.prod(1.0 - q)
    one = sum(q[i] * np.prod(np.delete(1.0 - q, i)) for i in range(q.size))
    return float(1.0 - none - one)


def expected_multiclick(mixture, config: OpticsConfig, port: Port = Port.CONSTRUCTIVE) -> float:
    """Analytic multi-window click probability per pulse.

    ``mixture`` is an iterable of ``(weight, photon_number, delta_phi)``; each
    component's three windows click independently given the photon number.
    """
    return float(sum(wt * _at_least_two(_window_click_probs(n, dphi, config, port)) for wt, n, dphi in mixture))


def honest_b92_mixture(config: OpticsConfig, n_max: int = 40):
    """Photon-number/phase mixture of an honest B92 run (random bits both sides)."""
    from scipy.stats import poisson

    mu = config.source.mu_central
    out = []
    for a in (0, 1):
        for b in (0, 1):
            dphi = b92_alice_phase(a) - b92_bob_phase(b)
            for n in range(n_max + 1):
                out.append((0.25 * poisson.pmf(n, mu), n, dphi))
    return out


def bob_basis_mixture(config: OpticsConfig, attack: AttackModel, n_max: int = 40):
    """Mixture seen by Bob under a full Bob's-basis attack on a Poisson source."""
    from scipy.stats import poisson

    mu = config.source.mu_central
    p_lit = 1.0 - poisson.pmf(0, mu)
    f = attack.fraction
    out = []
    # untouched pulses
    for a in (0, 1):
        for b in (0, 1):
            dphi = b92_alice_phase(a) - b92_bob_phase(b)
            for n in range(n_max + 1):
                out.append(((1 - f) * 0.25 * poisson.pmf(n, mu), n, dphi))
    # attacked and non-empty: conclusive with probability 1/4, else suppressed
    conclusive = f * p_lit * 0.25
    for e in (0, 1):
        for b in (0, 1):
            dphi = b92_alice_phase(e) - b92_bob_phase(b)
            out.append((conclusive * 0.5 * 0.5, attack.resend_multiplicity, dphi))
    out.append((f * p_lit * 0.75, 0, 0.0))
    out.append((f * (1 - p_lit), 0, 0.0))
    return out


__all__ = [
    "AttackKind",
    "AttackModel",
    "Confidence",
    "EveBatch",
    "EveEntry",
    "EveRecord",
    "apply_attack",
    "beamsplit",
    "bob_basis_mixture",
    "eve_info_fraction",
    "expected_multiclick",
    "honest_b92_mixture",
    "intercept_alice_basis",
    "intercept_bob_basis",
    "multiclick_fraction",
    "tappable_fraction",
]
