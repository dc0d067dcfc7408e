import math

import numpy as np
import pytest

from spdc.errors import ConfigError, DomainError
from spdc.spectral_model import (
    DetuningGrid, FilterSpec, SpectralAmplitude, apply_filters,
    apply_quadratic_phase, apply_window, build_type1, build_type2,
    filter_coherence_time, half_max_crossings, nm_from_omega, omega_from_nm,
    spectral_fwhm_nm, to_frame
)


def test_grid_layout():
    grid = DetuningGrid(0.001, 1024)
    assert grid.count == 2049
    assert grid.nu[1024] == 0.0
    assert np.allclose(grid.nu, -grid.nu[::-1])
    assert np.sum(grid.weights) == pytest.approx(2 * grid.half_span)
    assert grid.max_delay == pytest.approx(np.pi / 0.001)
    delays = grid.conjugate_delays()
    assert delays.size == grid.count
    assert delays[1] - delays[0] == pytest.approx(2 * np.pi / (grid.count * grid.spacing))


def test_grid_arrays_are_read_only():
    grid = DetuningGrid(0.001, 1024)
    with pytest.raises(ValueError):
        grid.nu[0] = 1.0


def test_grid_validation():
    with pytest.raises(ConfigError):
        DetuningGrid(0.001, 100)
    with pytest.raises(ConfigError):
        DetuningGrid(0.0, 1024)


def test_type2_grid_holds_requested_zeros(D, crystal):
    grid = DetuningGrid.for_type2(D, crystal.length_um, 64)
    first_zero = 2 * np.pi / (D * crystal.length_um)
    assert grid.half_span == pytest.approx(64 * first_zero)


def test_type2_amplitude(type2, D, crystal):
    DL = D * crystal.length_um
    assert type2.kind == "type-II"
    assert type2.group_delay_fs == pytest.approx(DL / 2)
    assert np.max(np.abs(type2.values)) == pytest.approx(1.0)
    assert abs(type2.values[type2.grid.half_count]) == pytest.approx(1.0)
    # the sinc vanishes at νDL/2 = π
    assert abs(np.interp(2 * np.pi / DL, type2.nu, np.abs(type2.values))) < 1e-3


def test_amplitude_values_are_read_only(type2):
    with pytest.raises(ValueError):
        type2.values[0] = 0.0


def test_type2_needs_enough_zeros(D, crystal):
    grid = DetuningGrid.for_type2(D, crystal.length_um, 4)
    with pytest.raises(ConfigError):
        build_type2(D, crystal.length_um, grid)


def test_type1_needs_enough_zeros(Dpp, crystal):
    grid = DetuningGrid.for_type1(Dpp, crystal.length_um, 2)
    with pytest.raises(ConfigError):
        build_type1(Dpp, crystal.length_um, grid)


def test_grid_beyond_zero_idler_frequency_rejected():
    grid = DetuningGrid.from_span(3.0, 1024)
    with pytest.raises(ConfigError):
        SpectralAmplitude(grid, np.ones(grid.count), float(omega_from_nm(702.2)))


def test_signal_and_idler_wavelengths(type2):
    assert type2.center_nm == pytest.approx(702.2)
    omega_sum = omega_from_nm(type2.signal_nm()) + omega_from_nm(type2.idler_nm())
    assert np.allclose(omega_sum, 2 * type2.center_omega)
    assert nm_from_omega(omega_from_nm(702.2)) == pytest.approx(702.2)


def test_spectral_widths(type1, type2):
    assert spectral_fwhm_nm(type2) == pytest.approx(2.91, abs=0.15)
    assert spectral_fwhm_nm(type1) == pytest.approx(66.0, abs=4.0)


@pytest.mark.parametrize("basis", ["field", "intensity"])
def test_gaussian_filter_half_width(basis):
    spec = FilterSpec(702.2, 10.0, "gaussian", basis)
    edge = 702.2 + 5.0
    if basis == "field":
        assert float(spec.field(edge)) == pytest.approx(0.5)
    else:
        assert float(spec.transmission(edge)) == pytest.approx(0.5)
    assert float(spec.transmission(702.2)) == pytest.approx(1.0)


def test_rectangular_and_flat_filters():
    box = FilterSpec(702.2, 4.0, "rectangular")
    assert np.array_equal(box.field(np.array([700.0, 702.2, 704.5])), [0.0, 1.0, 0.0])
    flat = FilterSpec.flat()
    assert flat.is_flat
    assert np.all(flat.transmission(np.linspace(500, 900, 5)) == 1.0)


def test_filter_validation():
    with pytest.raises(ConfigError):
        FilterSpec(702.2, 0.0)
    with pytest.raises(ConfigError):
        FilterSpec(702.2, 3.0, "lorentzian")
    with pytest.raises(ConfigError):
        FilterSpec(702.2, 3.0, "gaussian", "power")


def test_filters_narrow_the_spectrum(type1):
    filtered = apply_filters(type1, FilterSpec(702.2, 20.0), FilterSpec(702.2, 20.0))
    assert np.max(np.abs(filtered.values)) == pytest.approx(1.0)
    assert spectral_fwhm_nm(filtered) < 20.0
    assert "filters" in filtered.description


def test_flat_filters_change_nothing(type2):
    filtered = apply_filters(type2, FilterSpec.flat(), FilterSpec.flat())
    assert np.allclose(filtered.values, type2.values)


def test_filter_outside_grid_raises(type2):
    with pytest.raises(DomainError):
        apply_filters(type2, FilterSpec(400.0, 3.0), FilterSpec.flat())


def test_disjoint_filters_raise(type1):
    box = FilterSpec(690.0, 1.0, "rectangular")
    with pytest.raises(DomainError):
        apply_filters(type1, box, box)


def test_quadratic_phase_keeps_magnitude(type1):
    assert apply_quadratic_phase(type1, 0.0) is type1
    chirped = apply_quadratic_phase(type1, 5000.0)
    assert np.allclose(np.abs(chirped.values), np.abs(type1.values))
    assert not np.allclose(chirped.values, type1.values)


def test_window_scales_by_square_root(type2):
    weight = np.full(type2.grid.count, 0.25)
    windowed = apply_window(type2, weight)
    # uniform weight disappears after renormalization
    assert np.allclose(windowed.values, type2.values)
    with pytest.raises(ConfigError):
        apply_window(type2, -weight)
    with pytest.raises(ConfigError):
        apply_window(type2, weight[:-1])


def test_filter_coherence_time():
    assert filter_coherence_time(702.2, 3.0) == pytest.approx(548.25, abs=0.01)
    assert filter_coherence_time(702.2, 20.0) == pytest.approx(82.24, abs=0.01)
    widths = np.array([1.0, 3.0, 20.0, 80.0])
    times = np.array([filter_coherence_time(702.2, w) for w in widths])
    assert np.allclose(times * widths, times[0] * widths[0])
    with pytest.raises(ConfigError):
        filter_coherence_time(702.2, 0.0)


def test_half_max_crossings():
    x = np.linspace(-2, 2, 401)
    lo, hi, multimodal = half_max_crossings(x, np.clip(1 - np.abs(x), 0, None))
    assert (lo, hi) == pytest.approx((-0.5, 0.5))
    assert not multimodal

    twin = np.exp(-((x - 1) / 0.2) ** 2) + np.exp(-((x + 1) / 0.2) ** 2)
    assert half_max_crossings(x, twin)[2]

    with pytest.raises(ValueError):
        half_max_crossings(x, np.ones_like(x))


def test_to_frame(type2):
    frame = to_frame(type2)
    assert list(frame.columns) == ["nu_rad_per_fs", "re", "im", "abs"]
    assert len(frame) == type2.grid.count
    assert math.isclose(frame["abs"].max(), 1.0)
