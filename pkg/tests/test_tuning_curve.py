import math
from dataclasses import replace

import numpy as np
import pytest

from spdc.crystal_optics import solve_collinear_pm_angle
from spdc.correlation import fwhm
from spdc.errors import ConfigError, DomainError
from spdc.interferometry import envelope_width, hom_closed
from spdc.montecarlo_detection import expected_visibility
from spdc.spectral_model import FilterSpec, apply_filters
from spdc.tuning_curve import (
    ApertureGeometry, calibrate_brightness, calibrate_pump_angle,
    conjugate_wavelength, counting_config_from_window, emission_angles,
    momentum_residuals, pair_window, predict_two_photon_envelope, tuning_curve
)

from .conftest import DEGENERATE_NM, PUMP_NM

WINDOW = dict(nu_step=1e-3, angle_range_deg=(1.0, 6.0))


@pytest.fixture(scope="module")
def geometry(crystal):
    return calibrate_pump_angle(crystal, PUMP_NM, 3.0)


@pytest.fixture(scope="module")
def apertures():
    return ApertureGeometry.standard(1), ApertureGeometry.standard(-1)


def _filters(width: float) -> tuple[FilterSpec, FilterSpec]:
    return FilterSpec(DEGENERATE_NM, width), FilterSpec(DEGENERATE_NM, width)


@pytest.fixture(scope="module")
def open_window(geometry, apertures):
    return pair_window(geometry, *apertures, **WINDOW)


@pytest.fixture(scope="module")
def wide_window(geometry, apertures):
    return pair_window(geometry, *apertures, _filters(80.0), **WINDOW)


def test_conjugate_wavelength():
    assert conjugate_wavelength(662.0) == pytest.approx(747.6, abs=0.2)
    assert conjugate_wavelength(DEGENERATE_NM, PUMP_NM) == pytest.approx(DEGENERATE_NM)
    with pytest.raises(DomainError):
        conjugate_wavelength(300.0, PUMP_NM)


def test_calibrated_degenerate_angles(geometry, crystal):
    theta_s, theta_i = geometry.emission_angles(DEGENERATE_NM)
    assert theta_s == pytest.approx(3.0, abs=1e-6)
    assert theta_i == pytest.approx(-3.0, abs=1e-6)
    assert geometry.calibrated
    assert geometry.pump_angle_deg > solve_collinear_pm_angle(
        PUMP_NM, DEGENERATE_NM, "I", crystal
    )


def test_calibration_target_range(crystal):
    with pytest.raises(ConfigError):
        calibrate_pump_angle(crystal, PUMP_NM, 45.0)


def test_emission_conserves_momentum(geometry, crystal):
    for signal_nm in (660.0, 702.2, 740.0):
        theta_s, theta_i = emission_angles(
            signal_nm, PUMP_NM, crystal, geometry.pump_angle_deg
        )
        longitudinal, transverse = momentum_residuals(
            signal_nm, PUMP_NM, crystal, geometry.pump_angle_deg, theta_s, theta_i
        )
        assert abs(longitudinal) < 1e-8
        assert abs(transverse) < 1e-8


def test_branches_mirror_each_other(geometry):
    lam = np.linspace(660, 740, 9)
    signal = tuning_curve(geometry, lam, "signal")
    idler = tuning_curve(geometry, lam, "idler")
    assert np.allclose(idler.theta_ext_deg, -signal.theta_ext_deg, atol=1e-9)
    frame = signal.to_frame()
    assert list(frame.columns) == ["lambda_nm", "theta_ext_deg", "branch"]
    with pytest.raises(ConfigError):
        tuning_curve(geometry, lam, "pump")


def test_idler_of_662_misses_its_aperture(geometry, apertures):
    _, theta_i = geometry.emission_angles(662.0)
    assert not apertures[1].accepts(theta_i)
    assert abs(theta_i - apertures[1].center_angle_deg) > 3 * apertures[1].half_acceptance_deg


def test_aperture_geometry():
    aperture = ApertureGeometry.standard(1)
    assert aperture.half_acceptance_deg == pytest.approx(0.0307, abs=1e-4)
    assert aperture.accepts(3.02)
    assert not aperture.accepts(3.04)
    assert ApertureGeometry.unlimited().accepts(45.0)
    with pytest.raises(ConfigError):
        ApertureGeometry(3.0, 2800.0, 0.0)


def test_open_window(open_window):
    assert np.all((open_window.weight >= 0) & (open_window.weight <= 1))
    assert 0 < open_window.pair_fraction <= 1
    assert open_window.effective_pair_fwhm_nm == pytest.approx(7.0, abs=3.0)
    assert open_window.singles_fwhm_nm > 3 * open_window.effective_pair_fwhm_nm
    summary = open_window.summary()
    assert summary["pump_angle_calibrated"]
    assert set(open_window.to_frame().columns) == {
        "nu_rad_per_fs", "weight", "singles", "pair_density"
    }


def test_narrow_filters_raise_pair_fraction(geometry, apertures, wide_window):
    narrow = pair_window(geometry, *apertures, _filters(3.0), **WINDOW)
    assert narrow.pair_fraction > 0.5
    assert narrow.pair_fraction > 2 * wide_window.pair_fraction


def test_pair_fraction_grows_with_idler_aperture(geometry, apertures):
    signal, idler = apertures
    fractions = [
        pair_window(
            geometry, signal, replace(idler, diameter_mm=d), _filters(3.0), **WINDOW
        ).pair_fraction
        for d in (1.5, 3.0, 6.0)
    ]
    assert fractions == sorted(fractions)


def test_misaligned_apertures(geometry):
    with pytest.raises(DomainError):
        pair_window(geometry, ApertureGeometry(3.0), ApertureGeometry(3.0), **WINDOW)


def test_window_argument_checks(geometry, apertures):
    with pytest.raises(ConfigError):
        pair_window(geometry, *apertures, nu_step=1.0, nu_max=0.5)
    with pytest.raises(ConfigError):
        pair_window(geometry, *apertures, angle_range_deg=(5.0, 1.0))


def test_predicted_envelope_is_limited_by_window(type1, wide_window):
    T = apply_filters(type1, *_filters(80.0))
    tau = np.linspace(-400, 400, 1601)
    predicted = fwhm(predict_two_photon_envelope(wide_window, T, tau)).value
    unrestricted = envelope_width(hom_closed(T, tau))
    assert predicted > 2 * unrestricted


def test_counting_rates_from_window(wide_window):
    cfg = counting_config_from_window(wide_window, 1e6, window_ns=2.0)
    assert cfg.pair_rate == pytest.approx(1e6 * wide_window.pair_total)
    assert cfg.singles_excess_rate >= 0
    assert cfg.window_ns == 2.0
    with pytest.raises(ConfigError):
        counting_config_from_window(wide_window, -1.0)


def test_brightness_calibration(wide_window):
    brightness = calibrate_brightness(wide_window, 0.86, 0.32, 3.0)
    cfg = counting_config_from_window(wide_window, brightness, window_ns=3.0)
    estimate = expected_visibility(cfg, 0.07, 0.93)
    assert estimate.raw == pytest.approx(0.32, abs=1e-6)
    assert estimate.corrected == pytest.approx(0.86, abs=1e-9)
    assert wide_window.accidental_ratio(2 * brightness) > wide_window.accidental_ratio(brightness)
    with pytest.raises(DomainError):
        calibrate_brightness(wide_window, 0.5, 0.6)


def test_unlimited_apertures_accept_everything(geometry):
    window = pair_window(
        geometry, ApertureGeometry.unlimited(3.0), ApertureGeometry.unlimited(-3.0), **WINDOW
    )
    assert math.isclose(window.pair_fraction, 1.0, rel_tol=1e-9)
