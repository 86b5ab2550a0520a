from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fiberqkd import analysis, optics
from fiberqkd.analysis import VisibilityEstimate
from fiberqkd.encoding import ProtocolKind
from fiberqkd.optics import ChannelConfig, DetectorConfig, OpticsConfig, SourceConfig
from fiberqkd.protocol import Seeds, sift, transmit

REF_V = VisibilityEstimate(0.9899, 0.0124)


# ---------------------------------------------------------------- visibility


def test_visibility_reconstruction():
    v = analysis.visibility(10_668 + 1_048, 1_102, 1_048)
    assert v.value == pytest.approx(0.9899, abs=5e-5)
    assert v.background_subtracted and not v.clamped
    assert 0.0 < v.sigma < 0.05


def test_visibility_limits():
    assert analysis.visibility(500, 0).value == 1.0
    assert analysis.visibility(500, 500).value == 0.0
    assert not analysis.visibility(500, 10).background_subtracted


def test_visibility_sigma_oracle():
    # finite-difference propagation; each subtracted count carries the background variance too
    big, small, bg = 900.0, 60.0, 40.0

    def v(b, s):
        return (b - s) / (b + s - 2 * bg)

    h = 1e-4
    db = (v(big + h, small) - v(big - h, small)) / (2 * h)
    ds = (v(big, small + h) - v(big, small - h)) / (2 * h)
    expected = math.sqrt(db**2 * (big + bg) + ds**2 * (small + bg))
    assert analysis.visibility(big, small, bg).sigma == pytest.approx(expected, rel=1e-6)


def test_visibility_clamp_and_errors():
    v = analysis.visibility(1000, 20, 50)
    assert v.clamped and v.value == 1.0
    with pytest.raises(ValueError):
        analysis.visibility(10, 5, 20)
    with pytest.raises(ValueError):
        analysis.visibility(-1, 0)
    with pytest.raises(ValueError):
        analysis.visibility(10, 20)


# ---------------------------------------------------------------- density matrices and bounds


def test_density_validation():
    for rho in (analysis.rho_coherent(0.3), analysis.rho_mixed(), analysis.rho_collapse(0.2), analysis.rho_dephased(0.5)):
        analysis.validate_density(rho)
    with pytest.raises(ValueError):
        analysis.validate_density(np.eye(2))
    with pytest.raises(ValueError):
        analysis.validate_density(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        analysis.validate_density(np.array([[1.5, 0], [0, -0.5]]))
    with pytest.raises(ValueError):
        analysis.validate_density(np.eye(3) / 3)


def test_contrast_of_models():
    assert analysis.contrast(analysis.rho_coherent()) == pytest.approx(1.0)
    assert analysis.contrast(analysis.rho_mixed()) == 0.0
    assert analysis.contrast(analysis.rho_collapse(0.3)) == pytest.approx(0.7)
    assert analysis.contrast(analysis.rho_dephased(0.2)) == pytest.approx(math.exp(-0.2))


def test_reference_bounds():
    assert analysis.collapse_bound(REF_V) == pytest.approx(0.0225, abs=1e-4)
    assert analysis.dephasing_bound(REF_V) == pytest.approx(-math.log(0.9775), rel=1e-9)
    assert analysis.dephasing_bound(REF_V) == pytest.approx(0.0228, abs=1e-4)
    assert analysis.dephasing_bound(REF_V, "gaussian-phase") == pytest.approx(0.213, abs=1e-3)


def test_bound_limits():
    assert analysis.collapse_bound(VisibilityEstimate(1.0, 0.0)) == 0.0
    assert analysis.collapse_bound(VisibilityEstimate(0.0, 0.0)) == 1.0
    for conv in analysis.CONVENTIONS:
        assert analysis.dephasing_bound(VisibilityEstimate(1.0, 0.0), conv) == 0.0
    assert analysis.dephasing_bound(VisibilityEstimate(0.0, 0.0)) == math.inf
    with pytest.raises(ValueError):
        analysis.dephasing_bound(REF_V, "lorentzian")
    with pytest.raises(ValueError):
        analysis.collapse_bound(VisibilityEstimate(0.01, 0.05))


def test_decoherence_bounds_carry_convention():
    got = analysis.decoherence_bounds(REF_V)
    assert [b.convention for b in got] == list(analysis.CONVENTIONS)
    assert all(b.p_collapse == got[0].p_collapse for b in got)


@given(st.floats(0.05, 0.99), st.floats(0.001, 0.04))
def test_bounds_decrease_with_visibility(v, dv):
    lo, hi = VisibilityEstimate(v, 0.01), VisibilityEstimate(v + dv, 0.01)
    if hi.value - hi.sigma > 1.0 or lo.value - lo.sigma < 0.0:
        return
    assert analysis.collapse_bound(hi) < analysis.collapse_bound(lo)
    for conv in analysis.CONVENTIONS:
        assert analysis.dephasing_bound(hi, conv) < analysis.dephasing_bound(lo, conv)


# ---------------------------------------------------------------- photon statistics


@pytest.mark.parametrize("mu, expected", [(0.63, 0.282), (0.39, 0.182), (0.1, 0.0492)])
def test_multiphoton_fraction(mu, expected):
    assert analysis.multiphoton_fraction(mu) == pytest.approx(expected, abs=5e-4)
    e = math.exp(-mu)
    assert analysis.multiphoton_fraction(mu) == pytest.approx((1 - e - mu * e) / (1 - e), rel=1e-9)


def test_multiphoton_small_mu_limit():
    for mu in (1e-3, 1e-6, 1e-9):
        assert analysis.multiphoton_fraction(mu) == pytest.approx(mu / 2, rel=1e-3)
    assert analysis.multiphoton_fraction(0.0) == 0.0
    with pytest.raises(ValueError):
        analysis.multiphoton_fraction(-0.1)


@given(st.floats(1e-6, 20.0), st.floats(1e-4, 5.0))
def test_multiphoton_monotone_and_bounded(mu, d):
    a, b = analysis.multiphoton_fraction(mu), analysis.multiphoton_fraction(mu + d)
    assert 0.0 <= a < b < 1.0


# ---------------------------------------------------------------- rate budget


def test_48km_rate_budget():
    rb = analysis.rate_budget(OpticsConfig())
    assert 5.0 <= rb.product <= 20.0
    assert rb.product == pytest.approx(6.592, abs=2e-3)
    names = [name for name, _ in rb.factors]
    assert names[0] == "pulse rate [Hz]" and len(names) == 5
    assert dict(rb.factors)["channel transmission"] == pytest.approx(1 / 195, rel=0.01)
    assert rb.as_dict()["rate_hz"] == rb.product


def test_rate_budget_limit():
    cfg = OpticsConfig(
        source=SourceConfig(mu_central=60.0),
        channel=ChannelConfig(0, 0, 0),
        detector=DetectorConfig(efficiency=1.0),
    )
    assert analysis.rate_budget(cfg, ProtocolKind.BB84).product == pytest.approx(1e5 / 2)


@pytest.mark.parametrize("kind", [ProtocolKind.B92, ProtocolKind.BB84])
def test_rate_budget_matches_monte_carlo(kind):
    cfg = OpticsConfig(
        source=SourceConfig(single_photon=True),
        channel=ChannelConfig(0, 0, 6.0),
        detector=DetectorConfig(efficiency=0.3, dark_rate_override=0.0, intrinsic_visibility=1.0),
        interferometer="simple",
    )
    n = 400_000
    run = transmit(kind, n, cfg, seeds=Seeds(4, 5, 6, 7, 8))
    a, _ = sift(kind, run.alice, run.bob)
    p = analysis.rate_budget(cfg, kind).product / cfg.source.pulse_rate
    se = math.sqrt(p * (1 - p) / n)
    assert abs(len(a) / n - p) < 4 * se


def test_expected_b92_default_config():
    e = analysis.expected_b92(OpticsConfig())
    assert e["sifted_rate_hz"] == pytest.approx(10.81, abs=0.01)
    assert e["ber"] == pytest.approx(0.09308, abs=5e-5)
    assert e["dark_error_fraction"] == pytest.approx(0.9108, abs=5e-4)


# ---------------------------------------------------------------- detector efficiency


def test_optimal_efficiency_default_law():
    assert analysis.optimal_efficiency() == pytest.approx(1 / 9.2, abs=1e-6)


def test_optimal_efficiency_constant_law():
    assert analysis.optimal_efficiency(lambda eta: 7.4) == 1.0


@pytest.mark.parametrize("a", [2.0, 5.0, 9.2, 20.0])
def test_optimal_efficiency_exponential_laws(a):
    assert analysis.optimal_efficiency(lambda eta: 3.0 * math.exp(a * eta)) == pytest.approx(1 / a, abs=1e-6)


def test_optimal_efficiency_weak_exponent_hits_boundary():
    # the stationary point 1/a lies beyond eta = 1
    assert analysis.optimal_efficiency(lambda eta: math.exp(0.5 * eta)) == 1.0


# ---------------------------------------------------------------- QND detectability


def test_qnd_default_config_invisible():
    cfg = OpticsConfig()
    rates = analysis.qnd_rates(cfg)
    assert rates.two_photon_rate > rates.bob_detection_rate
    assert analysis.qnd_detectability(cfg)


def test_qnd_lossless_visible():
    cfg = OpticsConfig(channel=ChannelConfig(0, 0, 0), detector=DetectorConfig(efficiency=1.0))
    assert not analysis.qnd_detectability(cfg)
    assert analysis.qnd_threshold_mu(cfg) == math.inf


def test_qnd_threshold_by_bisection():
    cfg = OpticsConfig()
    mu_star = analysis.qnd_threshold_mu(cfg)
    t_eta = optics.transmission(cfg.channel) * cfg.detector.efficiency
    # independent bisection on the direct rate comparison
    lo, hi = 1e-9, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        src = SourceConfig(mu_central=mid)
        if analysis.qnd_detectability(OpticsConfig(source=src)):
            hi = mid
        else:
            lo = mid
    assert mu_star == pytest.approx(hi, rel=1e-6)
    assert mu_star == pytest.approx(2 * t_eta, rel=0.01)
    below = OpticsConfig(source=SourceConfig(mu_central=0.5 * mu_star))
    above = OpticsConfig(source=SourceConfig(mu_central=2 * mu_star))
    assert not analysis.qnd_detectability(below) and analysis.qnd_detectability(above)
