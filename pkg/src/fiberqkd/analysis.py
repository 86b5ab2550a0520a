"""Derived quantities: visibility, decoherence bounds, photon statistics and rate budgets.

Density matrices are written in the {short-long, long-short} path basis; the
interference contrast of a state is ``2 |rho_01|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammainc

from . import optics
from .encoding import ProtocolKind, b92_alice_phase, b92_bob_phase
from .optics import OpticsConfig, Port, Window

# ------------------------------------------------------------------ visibility


@dataclass(frozen=True)
class VisibilityEstimate:
    value: float
    sigma: float
    background_subtracted: bool = True
    clamped: bool = False


def visibility(max_counts: float, min_counts: float, background: float = 0.0) -> VisibilityEstimate:
    """Fringe visibility with Poisson error propagation.

    Raw counts and the background are treated as independent Poisson
    variables.  A background above the minimum clamps the subtracted minimum
    at zero and sets ``clamped``.
    """
    if min(max_counts, min_counts, background) < 0:
        raise ValueError("counts must be non-negative")
    big = max_counts - background
    small = min_counts - background
    clamped = small < 0
    small = max(small, 0.0)
    if big <= 0:
        raise ValueError("maximum does not exceed the background")
    if small > big:
        raise ValueError("minimum exceeds maximum")
    total = big + small
    value = (big - small) / total
    d_big = 2.0 * small / total**2
    d_small = -2.0 * big / total**2
    var = d_big**2 * (max_counts + background) + d_small**2 * (min_counts + background)
    return VisibilityEstimate(value, math.sqrt(var), background > 0, clamped)


# ------------------------------------------------------------------ density matrices


def _pure(phase: float = 0.0) -> np.ndarray:
    off = np.exp(-1j * phase)
    return 0.5 * np.array([[1.0, off], [np.conj(off), 1.0]], dtype=complex)


def rho_coherent(phase: float = 0.0) -> np.ndarray:
    """Both paths in superposition."""
    return _pure(phase)


def rho_mixed() -> np.ndarray:
    """Which-path mixture: no interference."""
    return 0.5 * np.eye(2, dtype=complex)


def rho_collapse(p: float, phase: float = 0.0) -> np.ndarray:
    return (1.0 - p) * rho_coherent(phase) + p * rho_mixed()


def rho_dephased(xi: float, phase: float = 0.0) -> np.ndarray:
    """Coherence damped by ``exp(-xi)``."""
    rho = rho_coherent(phase)
    rho[0, 1] *= math.exp(-xi)
    rho[1, 0] *= math.exp(-xi)
    return rho


def rho_gaussian_phase(width: float, phase: float = 0.0) -> np.ndarray:
    """Average over a Gaussian phase jitter of standard deviation ``width``."""
    rho = rho_coherent(phase)
    damp = math.exp(-0.5 * width**2)
    rho[0, 1] *= damp
    rho[1, 0] *= damp
    return rho


def validate_density(rho: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix must be Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix must be positive semidefinite")
    return rho


def contrast(rho: np.ndarray) -> float:
    return float(2.0 * abs(validate_density(rho)[0, 1]))


@dataclass(frozen=True)
class DecoherenceBounds:
    p_collapse: float
    xi_dephasing: float
    convention: str


CONVENTIONS = ("log-contrast", "gaussian-phase")


def _lower_contrast(v: VisibilityEstimate) -> float:
    target = v.value - v.sigma
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"V - sigma = {target} lies outside [0, 1]")
    return target


def collapse_bound(v: VisibilityEstimate) -> float:
    """Largest collapse probability consistent with the 1-sigma lower visibility."""
    target = _lower_contrast(v)
    c_coh = contrast(rho_coherent())
    c_mix = contrast(rho_mixed())
    p = (c_coh - target) / (c_coh - c_mix)
    if not math.isclose(contrast(rho_collapse(p)), target, abs_tol=1e-12):
        raise ArithmeticError("collapse model does not reproduce the target contrast")
    return p


def dephasing_bound(v: VisibilityEstimate, convention: str = "log-contrast") -> float:
    target = _lower_contrast(v)
    if target == 0.0:
        return math.inf
    if convention == "log-contrast":
        xi = -math.log(target)
        check = contrast(rho_dephased(xi))
    elif convention == "gaussian-phase":
        xi = math.sqrt(max(0.0, -2.0 * math.log(target)))
        check = contrast(rho_gaussian_phase(xi))
    else:
        raise ValueError(f"unknown convention {convention!r}; use one of {CONVENTIONS}")
    if not math.isclose(check, target, rel_tol=1e-10, abs_tol=1e-12):
        raise ArithmeticError("dephasing model does not reproduce the target contrast")
    return xi


def decoherence_bounds(v: VisibilityEstimate) -> list[DecoherenceBounds]:
    p = collapse_bound(v)
    return [DecoherenceBounds(p, dephasing_bound(v, c), c) for c in CONVENTIONS]


# ------------------------------------------------------------------ photon statistics


def p_nonempty(mu: float) -> float:
    return float(-math.expm1(-mu))


def p_multi(mu: float) -> float:
    """``P(n >= 2)`` for a Poisson source; exact for small ``mu``."""
    return float(gammainc(2, mu)) if mu > 0 else 0.0


def multiphoton_fraction(mu: float) -> float:
    """``P(n >= 2 | n >= 1)``."""
    if mu < 0:
        raise ValueError("mean photon number must be non-negative")
    if mu == 0:
        return 0.0
    return p_multi(mu) / p_nonempty(mu)


# ------------------------------------------------------------------ rate budget


@dataclass(frozen=True)
class RateBudget:
    factors: tuple[tuple[str, float], ...]
    product: float

    def as_dict(self) -> dict:
        return {"factors": [list(f) for f in self.factors], "rate_hz": self.product}


SIFT_FACTOR = {ProtocolKind.B92: 0.25, ProtocolKind.BB84: 0.5}


def rate_budget(config: OpticsConfig, kind: ProtocolKind = ProtocolKind.B92) -> RateBudget:
    """Itemised product estimate of the sifted-key rate (dark counts ignored)."""
    src = config.source
    factors = (
        ("pulse rate [Hz]", src.pulse_rate),
        ("pulses carrying a photon", 1.0 if src.single_photon else p_nonempty(src.mu_central)),
        ("channel transmission", optics.transmission(config.channel)),
        ("protocol sifting", SIFT_FACTOR[ProtocolKind(kind)]),
        ("detector efficiency", config.detector.efficiency),
    )
    return RateBudget(factors, float(np.prod([f for _, f in factors])))


def expected_b92(config: OpticsConfig) -> dict:
    """Analytic per-pulse sifted probability, BER and dark share of errors for B92."""
    keep = err = dark_err = 0.0
    pd = config.detector.dark_click_prob
    for a in (0, 1):
        for b in (0, 1):
            dphi = b92_alice_phase(a) - b92_bob_phase(b)
            p_click = optics.expected_click_probs(dphi, config)[Window.CENTRAL, Port.CONSTRUCTIVE]
            p_sig = optics.expected_signal_probs(dphi, config)[Window.CENTRAL, Port.CONSTRUCTIVE]
            keep += 0.25 * p_click
            if a != b:
                err += 0.25 * p_click
                dark_err += 0.25 * pd * (1.0 - p_sig)
    return {
        "sifted_per_pulse": float(keep),
        "sifted_rate_hz": float(keep * config.source.pulse_rate),
        "ber": float(err / keep) if keep else 0.0,
        "dark_error_fraction": float(dark_err / err) if err else 0.0,
    }


# ------------------------------------------------------------------ detector efficiency


def optimal_efficiency(law: Callable[[float], float] | None = None, lower: float = 1e-6) -> float:
    """Efficiency minimising the dark-dominated error rate ``R(eta) / eta``."""
    law = law or optics.dark_rate

    def cost(eta: float) -> float:
        return law(eta) / eta

    res = minimize_scalar(cost, bounds=(lower, 1.0), method="bounded", options={"xatol": 1e-10})
    best = float(res.x)
    return 1.0 if cost(1.0) <= cost(best) else best


# ------------------------------------------------------------------ QND attack visibility


@dataclass(frozen=True)
class QndCheck:
    two_photon_rate: float
    bob_detection_rate: float

    @property
    def invisible(self) -> bool:
        return self.two_photon_rate > self.bob_detection_rate


def qnd_rates(config: OpticsConfig) -> QndCheck:
    mu = config.source.mu_central
    rate = config.source.pulse_rate
    t_eta = optics.transmission(config.channel) * config.detector.efficiency
    return QndCheck(rate * p_multi(mu), rate * p_nonempty(mu) * t_eta)


def qnd_detectability(config: OpticsConfig) -> bool:
    """True when a photon-number-splitting suppression attack would not dent Bob's rate."""
    return qnd_rates(config).invisible


def qnd_threshold_mu(config: OpticsConfig) -> float:
    """Mean photon number below which the attack becomes visible, by bracketing root search."""
    t_eta = optics.transmission(config.channel) * config.detector.efficiency
    if t_eta >= 1.0:
        return math.inf
    return float(brentq(lambda mu: multiphoton_fraction(mu) - t_eta, 1e-12, 100.0, xtol=1e-15, rtol=1e-13))
