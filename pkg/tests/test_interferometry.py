import numpy as np
import pytest

from spdc.correlation import fwhm, g1_envelope
from spdc.errors import ConfigError, DomainError
from spdc.interferometry import (
    InterferencePattern, add_accidentals, analyzer_weights, baseline,
    envelope_width, exchange_overlap, fringe_visibility, hom_brute_force,
    hom_closed, hom_general, michelson, scale_visibility, subtract_accidentals,
    visibility
)
from spdc.spectral_model import apply_quadratic_phase


@pytest.fixture(scope="module")
def delays() -> np.ndarray:
    return np.linspace(-400, 400, 801)


@pytest.fixture(scope="module")
def dip(type2, delays):
    return hom_closed(type2, delays, "minus")


@pytest.fixture(scope="module")
def peak(type2, delays):
    return hom_closed(type2, delays, "plus")


def test_analyzer_weights():
    assert analyzer_weights(45, 45) == pytest.approx((0.5, 0.5))
    assert analyzer_weights(45, -45) == pytest.approx((-0.5, 0.5))
    assert analyzer_weights(0, 0) == pytest.approx((0.0, 0.0))


def test_michelson_fringes(type2):
    tau = np.arange(-20, 20, 0.2)
    pattern = michelson(type2, tau)
    assert pattern.at(0.0) == pytest.approx(1.0)
    assert fringe_visibility(pattern) == pytest.approx(1.0, abs=0.05)
    assert pattern.carrier_omega == type2.center_omega
    assert set(pattern.to_frame().columns) == {"tau_fs", "rate", "envelope"}


def test_michelson_envelope_is_g1(type2):
    tau = np.arange(-600, 600, 0.2)
    pattern = michelson(type2, tau)
    assert envelope_width(pattern) == pytest.approx(fwhm(g1_envelope(type2, tau)).value)


def test_michelson_rejects_coarse_steps(type2):
    with pytest.raises(DomainError):
        michelson(type2, np.arange(-20, 20, 1.0))


def test_closed_form_dip_and_peak(dip, peak):
    assert dip.at(0.0) == pytest.approx(0.0, abs=1e-9)
    assert peak.at(0.0) == pytest.approx(1.0, abs=1e-9)
    assert dip.at(400.0) == pytest.approx(0.5, abs=1e-2)
    assert visibility(dip, peak) == pytest.approx(1.0)
    assert np.allclose(dip.rate + peak.rate, 1.0)


def test_dip_is_half_the_correlation_width(type2, D, crystal, dip):
    DL = D * crystal.length_um
    assert envelope_width(dip) == pytest.approx(DL / 2, rel=1e-2)


def test_unknown_sign(type2, delays):
    with pytest.raises(ConfigError):
        hom_closed(type2, delays, "zero")


def test_general_matches_closed_form(type2, delays, dip, peak):
    parallel = hom_general(type2, delays, 45, 45)
    crossed = hom_general(type2, delays, 45, -45)
    assert np.max(np.abs(parallel.rate - dip.rate)) < 1e-3
    assert np.max(np.abs(crossed.rate - peak.rate)) < 1e-3


def test_general_absolute_delay_moves_dip(type2, D, crystal):
    DL = D * crystal.length_um
    tau = np.linspace(-100, 500, 601)
    pattern = hom_general(type2, tau, 45, 45, absolute_delay=True)
    assert pattern.tau[np.argmin(pattern.rate)] == pytest.approx(DL / 2, abs=1.0)


def test_general_without_interference(type2, delays):
    pattern = hom_general(type2, delays, 0, 30)
    assert np.allclose(pattern.rate, np.sin(np.radians(30)) ** 2)


def test_exchange_overlap_is_one_at_balance(type2):
    overlap = exchange_overlap(type2, np.array([0.0]))
    assert overlap[0].real == pytest.approx(1.0, abs=1e-9)


def test_general_envelope_width(type2, delays, dip):
    pattern = hom_general(type2, delays, 45, 45)
    assert envelope_width(pattern) == pytest.approx(envelope_width(dip), rel=2e-2)


def test_dip_ignores_quadratic_phase(type1):
    tau = np.linspace(-60, 60, 121)
    chirped = apply_quadratic_phase(type1, 5000.0)
    plain = hom_general(type1, tau, 45, 45).rate
    assert np.max(np.abs(hom_general(chirped, tau, 45, 45).rate - plain)) < 1e-10


@pytest.mark.parametrize("theta1, theta2", [(45, 45), (45, -45), (30, 60), (0, 90), (20, 45)])
def test_brute_force_matches_general(type2, theta1, theta2):
    tau = np.array([-300.0, -100.0, 0.0, 60.0, 300.0])
    brute = hom_brute_force(type2, tau, theta1, theta2, span_fs=1200, steps=2401)
    general = hom_general(type2, tau, theta1, theta2)
    assert np.allclose(brute.rate, general.rate, atol=1e-2)


def test_brute_force_validation(type2):
    with pytest.raises(ConfigError):
        hom_brute_force(type2, [0.0], 45, 45, span_fs=100, steps=2)


def test_visibility_needs_same_grid(type2, dip):
    other = hom_closed(type2, np.linspace(-300, 300, 11))
    with pytest.raises(ConfigError):
        visibility(dip, other)


def test_baseline_and_scaling(dip):
    assert baseline(dip) == pytest.approx(0.5, abs=1e-2)
    scaled = scale_visibility(dip, 0.86)
    assert scaled.at(0.0) == pytest.approx(0.07)
    assert scaled.metadata["visibility_factor"] == 0.86
    with pytest.raises(ConfigError):
        scale_visibility(dip, 1.5)


def test_visibility_of_scaled_traces(dip, peak):
    scaled_dip, scaled_peak = scale_visibility(dip, 0.84), scale_visibility(peak, 0.84)
    assert scaled_dip.at(0.0) == pytest.approx(0.08, abs=1e-8)
    assert scaled_peak.at(0.0) == pytest.approx(0.92, abs=1e-8)
    assert visibility(scaled_dip, scaled_peak) == pytest.approx(0.84, abs=1e-8)
    assert visibility(scaled_peak, scaled_dip) == pytest.approx(0.84, abs=1e-8)


def test_accidentals_round_trip(dip):
    level = 0.1
    raised = add_accidentals(dip, level)
    assert raised.at(0.0) == pytest.approx(level)
    restored = subtract_accidentals(raised, level)
    assert np.allclose(restored.rate, dip.rate, atol=1e-12)
    assert subtract_accidentals(dip, 0.0) is dip


@pytest.mark.parametrize("level", [-0.1, 0.5, 0.2])
def test_subtraction_limits(dip, level):
    # 0.2 exceeds the minimum of the untouched dip
    with pytest.raises(DomainError):
        subtract_accidentals(dip, level)


def test_pattern_validation():
    with pytest.raises(ConfigError):
        InterferencePattern(np.zeros(3), np.zeros(2), "hom_closed")
    with pytest.raises(ConfigError):
        InterferencePattern(np.zeros(3), np.zeros(3), "sagnac")
