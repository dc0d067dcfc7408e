import json
import shutil

import numpy as np
import pytest

from spdc.crystal_optics import (
    DATA_DIR_ENV, PACKAGE_DATA_DIR, CrystalConfig, SellmeierSet,
    group_delay, group_delay_mismatch, group_delay_numeric, group_params,
    gvd, gvd_numeric, index, index_extraordinary, index_ordinary,
    load_sellmeier, phase_mismatch,
    solve_collinear_pm_angle, wavenumber
)
from spdc.errors import ConfigError, DomainError

from .conftest import DEGENERATE_NM, PUMP_NM


def test_ordinary_index_at_degenerate_wavelength(crystal):
    assert float(index(DEGENERATE_NM, "o", 0.0, crystal)) == pytest.approx(1.6648, abs=2e-4)


def test_extraordinary_index_on_axis_is_ordinary(crystal):
    lam = np.linspace(400, 900, 11)
    assert np.allclose(index(lam, "e", 0.0, crystal), index(lam, "o", 0.0, crystal))


def test_extraordinary_index_at_ninety_degrees_is_principal(crystal):
    lam = np.linspace(400, 900, 11)
    assert np.allclose(index(lam, "e", 90.0, crystal), crystal.sellmeier_e.index(lam))


def test_index_helpers_match_index(crystal):
    lam = np.array([500.0, 702.2])
    s_o, s_e = crystal.sellmeier_o, crystal.sellmeier_e
    assert np.allclose(index_ordinary(lam, s_o), index(lam, "o", 0.0, crystal))
    assert np.allclose(index_extraordinary(lam, 48.9, s_o, s_e), index(lam, "e", 48.9, crystal))


def test_bbo_is_negative_uniaxial(crystal):
    lam = np.linspace(300, 1000, 15)
    assert np.all(crystal.sellmeier_e.index(lam) < crystal.sellmeier_o.index(lam))


def test_wavelength_outside_range_raises(crystal):
    with pytest.raises(DomainError):
        index(200.0, "o", 0.0, crystal)
    with pytest.raises(DomainError):
        index(np.array([500.0, 1200.0]), "e", 30.0, crystal)


def test_angle_outside_range_raises(crystal):
    with pytest.raises(DomainError):
        index(702.2, "e", 95.0, crystal)


def test_unknown_polarization_raises(crystal):
    with pytest.raises(ConfigError):
        index(702.2, "x", 0.0, crystal)


@pytest.mark.parametrize("pm_type, expected", [("II", 48.9), ("I", 33.2)])
def test_collinear_pm_angle(crystal, pm_type, expected):
    theta = solve_collinear_pm_angle(PUMP_NM, DEGENERATE_NM, pm_type, crystal)
    assert theta == pytest.approx(expected, abs=1.0)
    residual = phase_mismatch(theta, PUMP_NM, DEGENERATE_NM, DEGENERATE_NM, pm_type, crystal)
    assert abs(residual) < 1e-8


def test_pm_angle_needs_degenerate_wavelength(crystal):
    with pytest.raises(ConfigError):
        solve_collinear_pm_angle(PUMP_NM, 700.0, "II", crystal)


def test_no_phase_matching_raises(crystal):
    # 250 nm -> 500 nm type II stays mismatched even at 90 degrees
    with pytest.raises(DomainError):
        solve_collinear_pm_angle(250.0, 500.0, "II", crystal)


def test_type2_group_delay_mismatch(crystal, theta_type2):
    D = group_delay_mismatch(crystal, DEGENERATE_NM, theta_type2)
    assert D == pytest.approx(0.2502, rel=0.03)
    assert D * crystal.length_um / 2 == pytest.approx(247.0, rel=0.05)


def test_group_delay_mismatch_sign_follows_signal(crystal, theta_type2):
    D_e = group_delay_mismatch(crystal, DEGENERATE_NM, theta_type2, signal="e")
    D_o = group_delay_mismatch(crystal, DEGENERATE_NM, theta_type2, signal="o")
    assert D_o == pytest.approx(-D_e)


def test_group_delay_numeric_matches_analytic(crystal, theta_type2):
    for polarization in ("o", "e"):
        analytic = float(group_delay(DEGENERATE_NM, polarization, theta_type2, crystal))
        numeric = group_delay_numeric(DEGENERATE_NM, polarization, theta_type2, crystal)
        assert numeric == pytest.approx(analytic, rel=1e-7)
    assert group_delay_mismatch(
        crystal, DEGENERATE_NM, theta_type2, method="numeric"
    ) == pytest.approx(group_delay_mismatch(crystal, DEGENERATE_NM, theta_type2), abs=1e-6)


def test_gvd(crystal):
    Dpp = float(gvd(crystal, DEGENERATE_NM, "o"))
    assert Dpp == pytest.approx(0.0882, rel=0.05)
    assert gvd_numeric(crystal, DEGENERATE_NM, "o") == pytest.approx(Dpp, rel=1e-3)


@pytest.mark.parametrize("wavelength_nm", [500.0, 600.0, 800.0, 1000.0])
def test_gvd_matches_numeric_across_wavelengths(crystal, wavelength_nm):
    analytic = float(gvd(crystal, wavelength_nm, "o"))
    assert gvd_numeric(crystal, wavelength_nm, "o") == pytest.approx(analytic, rel=1e-3)


def test_gvd_is_continuous(crystal):
    values = gvd(crystal, np.linspace(500.0, 1000.0, 501), "o")
    assert np.all(values > 0)
    assert np.max(np.abs(np.diff(values))) < 1e-2 * np.max(values)


def test_group_params(crystal, theta_type2):
    params = group_params(crystal, DEGENERATE_NM, theta_type2)
    assert params.D > 0
    assert params.Dpp > 0
    assert params.angle_deg == theta_type2


def test_wavenumber_units(crystal):
    n = float(index(DEGENERATE_NM, "o", 0.0, crystal))
    k = float(wavenumber(DEGENERATE_NM, "o", 0.0, crystal))
    assert k == pytest.approx(2 * np.pi * n / 0.7022)


def test_sellmeier_validation():
    with pytest.raises(ConfigError):
        SellmeierSet("bad", "eimerl", (1.0, 2.0), (200.0, 1000.0))
    with pytest.raises(ConfigError):
        SellmeierSet("bad", "sellmeier", (1.0, 0.01, 2.0), (200.0, 1000.0))
    with pytest.raises(ConfigError):
        SellmeierSet("bad", "cauchy", (1.0,), (200.0, 1000.0))
    with pytest.raises(ConfigError):
        SellmeierSet("bad", "eimerl", (1.0, 0.0, 0.0, 0.0), (1000.0, 200.0))


def test_sellmeier_variant_agrees_with_itself():
    # n² = 1 + Bλ²/(λ² - C) written both ways
    B, C = 1.5, 0.01
    sellmeier = SellmeierSet("s", "sellmeier", (B, C), (300.0, 1000.0))
    eimerl = SellmeierSet("e", "eimerl", (1 + B, B * C, C, 0.0), (300.0, 1000.0))
    lam = np.linspace(400, 900, 7)
    assert np.allclose(sellmeier.index(lam), eimerl.index(lam))


def test_crystal_validation():
    s_o, s_e = load_sellmeier()
    with pytest.raises(ConfigError):
        CrystalConfig(0.0, 45.0, s_o, s_e)
    with pytest.raises(ConfigError):
        CrystalConfig(2000.0, 120.0, s_o, s_e)


def test_missing_sellmeier_file(tmp_path):
    with pytest.raises(ConfigError, match="bbo_o.json"):
        load_sellmeier("bbo", tmp_path)


def test_malformed_sellmeier_file(tmp_path):
    (tmp_path / "bad_o.json").write_text(json.dumps({"name": "x"}))
    (tmp_path / "bad_e.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_sellmeier("bad", tmp_path)


def test_data_dir_from_environment(tmp_path, monkeypatch):
    for name in ("bbo_o.json", "bbo_e.json"):
        shutil.copy(PACKAGE_DATA_DIR / name, tmp_path / name)
    document = json.loads((tmp_path / "bbo_o.json").read_text())
    document["name"] = "relocated"
    (tmp_path / "bbo_o.json").write_text(json.dumps(document))
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    s_o, _ = load_sellmeier()
    assert s_o.name == "relocated"
