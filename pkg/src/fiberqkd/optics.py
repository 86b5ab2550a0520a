"""Physical layer: weak-laser source, lossy fiber, interferometer pair and gated APDs.

Ports are named relative to zero phase difference: the ``CONSTRUCTIVE`` port is
bright when ``phi_a == phi_b``.  Report output maps them onto the U/L detector
labels through :attr:`OpticsConfig.u_port`.

Count normalisation
-------------------
``SourceConfig.mu_central`` is the mean photon number per pulse leaving Alice's
interferometer.  Per photon, the simulator routes detection intensity into the
six (window, port) cells with weights equal to ``WINDOW_SCALE`` times the
single-photon probabilities of :func:`central_prob` and :func:`side_window_prob`:
``(1 +/- V0 cos dphi) / 2`` in the central window and ``1/4`` in each side cell.
Central-window counts are therefore ``N * mu * (1 + V0 cos dphi) / 2 * T * eta``
and side peaks stand at one quarter of the central maximum.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

TWO_PI = 2.0 * math.pi

# Central window carries 1/4 of the injected photons at dphi = 0 (1/8 per port
# at cos = 0); rescaling by 4 references every cell to the central peak mean.
WINDOW_SCALE = 4.0

MAX_PULSE_RATE = 100e3  # Hz, above this after-pulsing dominates

DARK_LAW_PREFACTOR_KHZ = 7.4
DARK_LAW_EXPONENT = 9.2


class Port(enum.IntEnum):
    CONSTRUCTIVE = 0
    DESTRUCTIVE = 1


class Window(enum.IntEnum):
    PROMPT = 0
    CENTRAL = 1
    DELAYED = 2


def wrap_phase(phi: float) -> float:
    """Canonicalise an angle into ``[0, 2*pi)``."""
    out = math.fmod(phi, TWO_PI)
    if out < 0:
        out += TWO_PI
    # fmod can return exactly 2*pi after the correction for tiny negatives
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class PhasePair:
    phi_a: float
    phi_b: float

    def __post_init__(self):
        object.__setattr__(self, "phi_a", wrap_phase(self.phi_a))
        object.__setattr__(self, "phi_b", wrap_phase(self.phi_b))

    @property
    def delta(self) -> float:
        return self.phi_a - self.phi_b


@dataclass(frozen=True)
class SourceConfig:
    """Attenuated pulsed laser.

    ``single_photon`` replaces the Poisson source by exactly one photon per
    pulse; it is used for the ideal lossless protocol fixtures.
    """

    mu_central: float = 0.63
    pulse_rate: float = 100e3
    pulse_width: float = 300e-12
    single_photon: bool = False

    def __post_init__(self):
        if not self.mu_central > 0 and not self.single_photon:
            raise ValueError(f"mu_central must be positive, got {self.mu_central}")
        if not self.pulse_rate > 0:
            raise ValueError(f"pulse_rate must be positive, got {self.pulse_rate}")
        if self.pulse_rate > MAX_PULSE_RATE:
            warnings.warn(
                f"pulse rate {self.pulse_rate:g} Hz exceeds {MAX_PULSE_RATE:g} Hz; "
                "detector after-pulsing is not modelled",
                stacklevel=3,
            )


@dataclass(frozen=True)
class ChannelConfig:
    length_km: float = 48.0
    attenuation_db_per_km: float = 0.3
    extra_loss_db: float = 8.5

    def __post_init__(self):
        for name in ("length_km", "attenuation_db_per_km", "extra_loss_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km + self.extra_loss_db


@dataclass(frozen=True)
class DetectorConfig:
    """Gated InGaAs APD pair.  ``dark_rate_override`` is in kHz."""

    efficiency: float = 0.11
    gate_width: float = 0.9e-9
    dark_rate_override: float | None = None
    intrinsic_visibility: float = 0.9899

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not self.gate_width > 0:
            raise ValueError("gate_width must be positive")
        if not 0.0 <= self.intrinsic_visibility <= 1.0:
            raise ValueError("intrinsic_visibility must lie in [0, 1]")
        if self.dark_rate_override is not None and self.dark_rate_override < 0:
            raise ValueError("dark_rate_override must be non-negative")

    @property
    def dark_rate_khz(self) -> float:
        if self.dark_rate_override is not None:
            return self.dark_rate_override
        return dark_rate(self.efficiency)

    @property
    def dark_click_prob(self) -> float:
        """Per-gate, per-detector dark click probability ``R * tau``."""
        return min(1.0, self.dark_rate_khz * 1e3 * self.gate_width)


@dataclass(frozen=True)
class OpticsConfig:
    """Everything the physical layer needs.

    ``interferometer`` is ``"multiplexed"`` (unequal-arm pair with three
    arrival windows) or ``"simple"`` (single Mach-Zehnder, central window only).
    ``long_arm_transmission`` is the per-traversal power transmission of each
    long arm; it only shapes the side peaks.
    """

    source: SourceConfig = field(default_factory=SourceConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    interferometer: str = "multiplexed"
    long_arm_transmission: float = 1.0
    u_port: Port = Port.CONSTRUCTIVE

    def __post_init__(self):
        if self.interferometer not in ("multiplexed", "simple"):
            raise ValueError(f"unknown interferometer {self.interferometer!r}")
        if not 0.0 <= self.long_arm_transmission <= 1.0:
            raise ValueError("long_arm_transmission must lie in [0, 1]")

    def port_label(self, port: Port) -> str:
        return "U" if port == self.u_port else "L"


def ideal_config(interferometer: str = "simple") -> OpticsConfig:
    """Lossless, noiseless, single-photon configuration for protocol fixtures."""
    return OpticsConfig(
        source=SourceConfig(single_photon=True),
        channel=ChannelConfig(0.0, 0.0, 0.0),
        detector=DetectorConfig(efficiency=1.0, dark_rate_override=0.0, intrinsic_visibility=1.0),
        interferometer=interferometer,
    )


@dataclass(frozen=True)
class PulsePreparation:
    clock_index: int
    phi_a: float
    photon_count: int


@dataclass(frozen=True)
class DetectionEvent:
    clock_index: int
    port: Port
    window: Window
    dark: bool = False  # simulation oracle only


def dark_rate(eta: float) -> float:
    """APD dark-count rate in kHz as a function of detection efficiency."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    return DARK_LAW_PREFACTOR_KHZ * math.exp(DARK_LAW_EXPONENT * eta)


def simple_prob(pair: PhasePair, port: Port) -> float:
    """Single Mach-Zehnder: ``cos^2(dphi/2)`` on the constructive port."""
    c = math.cos(pair.delta / 2.0) ** 2
    return c if port == Port.CONSTRUCTIVE else 1.0 - c


def central_prob(pair: PhasePair, port: Port, visibility: float = 1.0) -> float:
    """Central-window probability per injected photon, ``(1 +/- V cos dphi) / 8``."""
    sign = 1.0 if port == Port.CONSTRUCTIVE else -1.0
    return (1.0 + sign * visibility * math.cos(pair.delta)) / 8.0


def side_window_prob(window: Window = Window.PROMPT, long_arm_transmission: float = 1.0) -> float:
    """Probability per port of the short-short (prompt) or long-long (delayed) peak."""
    if window == Window.CENTRAL:
        raise ValueError("central window interferes; use central_prob")
    if window == Window.PROMPT:
        return 1.0 / 16.0
    return long_arm_transmission**2 / 16.0


def transmission(channel: ChannelConfig) -> float:
    return 10.0 ** (-channel.total_db / 10.0)


def sample_photon_count(source: SourceConfig, rng: np.random.Generator) -> int:
    return int(sample_photon_counts(source, 1, rng)[0])


def sample_photon_counts(source: SourceConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if source.single_photon:
        return np.ones(n, dtype=np.int64)
    return rng.poisson(source.mu_central, size=n)


def cell_weights(delta_phi: np.ndarray, config: OpticsConfig) -> np.ndarray:
    """Per-photon intensity into each (window, port) cell, shape ``(N, 3, 2)``.

    Central weights of the two ports sum to one, so a photon that reaches the
    central window is routed to exactly one of them.  Side weights are
    independent of phase.
    """
    delta_phi = np.atleast_1d(np.asarray(delta_phi, dtype=float))
    v0 = config.detector.intrinsic_visibility
    w = np.zeros(delta_phi.shape + (3, 2))
    fringe = v0 * np.cos(delta_phi)
    w[..., Window.CENTRAL, Port.CONSTRUCTIVE] = 0.5 * (1.0 + fringe)
    w[..., Window.CENTRAL, Port.DESTRUCTIVE] = 0.5 * (1.0 - fringe)
    if config.interferometer == "multiplexed":
        a = config.long_arm_transmission
        w[..., Window.PROMPT, :] = WINDOW_SCALE * side_window_prob(Window.PROMPT, a)
        w[..., Window.DELAYED, :] = WINDOW_SCALE * side_window_prob(Window.DELAYED, a)
    return w


def gated_cells(config: OpticsConfig) -> np.ndarray:
    """Boolean ``(3, 2)`` mask of detector gates that exist in this configuration."""
    mask = np.ones((3, 2), dtype=bool)
    if config.interferometer == "simple":
        mask[Window.PROMPT] = False
        mask[Window.DELAYED] = False
    return mask


@dataclass
class ClickBatch:
    """Dense click record for a batch of pulses.

    ``signal[i, w, p]`` is True when at least one photon registered in cell
    (w, p) of pulse i; ``dark[i, w, p]`` when the gate fired with no photon.
    """

    signal: np.ndarray
    dark: np.ndarray

    @property
    def clicks(self) -> np.ndarray:
        return self.signal | self.dark

    def __len__(self) -> int:
        return self.signal.shape[0]


def simulate_pulses(
    phi_a: np.ndarray,
    phi_b: np.ndarray,
    photon_counts: np.ndarray,
    config: OpticsConfig,
    rng: np.random.Generator,
) -> ClickBatch:
    """Vectorised photon-level simulation of a batch of pulses."""
    phi_a = np.asarray(phi_a, dtype=float)
    phi_b = np.asarray(phi_b, dtype=float)
    counts = np.asarray(photon_counts, dtype=np.int64)
    n_pulses = counts.shape[0]
    t_eta = transmission(config.channel) * config.detector.efficiency

    signal = np.zeros((n_pulses, 3, 2), dtype=bool)
    lit = np.flatnonzero(counts > 0)
    if lit.size:
        n_lit = counts[lit]
        w = cell_weights(phi_a[lit] - phi_b[lit], config)
        # central window: one registered-photon draw, then split between ports
        central = rng.binomial(n_lit, t_eta)
        to_constructive = rng.binomial(central, w[:, Window.CENTRAL, Port.CONSTRUCTIVE])
        signal[lit, Window.CENTRAL, Port.CONSTRUCTIVE] = to_constructive > 0
        signal[lit, Window.CENTRAL, Port.DESTRUCTIVE] = (central - to_constructive) > 0
        if config.interferometer == "multiplexed":
            for win in (Window.PROMPT, Window.DELAYED):
                p = np.minimum(w[:, win, :] * t_eta, 1.0)
                hits = rng.binomial(n_lit[:, None], p)
                signal[lit, win, :] = hits > 0

    dark = np.zeros_like(signal)
    p_dark = config.detector.dark_click_prob
    if p_dark > 0:
        gates = np.flatnonzero(np.broadcast_to(gated_cells(config), (n_pulses, 3, 2)).ravel())
        k = rng.binomial(gates.size, p_dark)
        if k:
            chosen = gates[rng.choice(gates.size, size=k, replace=False)]
            dark.ravel()[chosen] = True
    dark &= ~signal
    return ClickBatch(signal=signal, dark=dark)


def events_from_batch(batch: ClickBatch, clock_offset: int = 0) -> Iterator[DetectionEvent]:
    idx, win, port = np.nonzero(batch.clicks)
    for i, w, p in zip(idx, win, port):
        yield DetectionEvent(
            clock_index=int(i) + clock_offset,
            port=Port(int(p)),
            window=Window(int(w)),
            dark=bool(batch.dark[i, w, p]),
        )


def simulate_pulse(
    prep: PulsePreparation,
    phi_b: float,
    config: OpticsConfig,
    rng: np.random.Generator,
) -> list[DetectionEvent]:
    batch = simulate_pulses(
        np.array([prep.phi_a]), np.array([phi_b]), np.array([prep.photon_count]), config, rng
    )
    return list(events_from_batch(batch, clock_offset=prep.clock_index))


def expected_click_probs(delta_phi: float, config: OpticsConfig) -> np.ndarray:
    """Analytic per-pulse click probability in each cell, shape ``(3, 2)``.

    Poisson thinning makes the signal photon number in each cell Poisson with
    mean ``mu * w * T * eta``; for a single-photon source the cell is hit with
    probability ``w * T * eta``.
    """
    w = cell_weights(np.array([delta_phi]), config)[0]
    t_eta = transmission(config.channel) * config.detector.efficiency
    if config.source.single_photon:
        p_signal = np.minimum(w * t_eta, 1.0)
    else:
        p_signal = -np.expm1(-config.source.mu_central * w * t_eta)
    p_dark = config.detector.dark_click_prob * gated_cells(config)
    return 1.0 - (1.0 - p_signal) * (1.0 - p_dark)


def expected_signal_probs(delta_phi: float, config: OpticsConfig) -> np.ndarray:
    """Like :func:`expected_click_probs` but photon-registered clicks only."""
    dark_free = OpticsConfig(
        source=config.source,
        channel=config.channel,
        detector=DetectorConfig(
            efficiency=config.detector.efficiency,
            gate_width=config.detector.gate_width,
            dark_rate_override=0.0,
            intrinsic_visibility=config.detector.intrinsic_visibility,
        ),
        interferometer=config.interferometer,
        long_arm_transmission=config.long_arm_transmission,
        u_port=config.u_port,
    )
    return expected_click_probs(delta_phi, dark_free)


def lane_rng(seed: int, lane: int = 0) -> np.random.Generator:
    """Independent random substream for a parallel lane."""
    return np.random.default_rng([int(seed), int(lane)])
