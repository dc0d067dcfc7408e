"""
Biphoton spectral amplitude T(ν) = S(ν)P(ν) on a detuning grid.

Detuning ν = ω_s - Ω is in rad/fs, Ω being half the pump frequency.
Signal and idler sit at Ω + ν and Ω - ν.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal, get_args

import numpy as np
import pandas as pd

from .crystal_optics import C_NM_PER_FS
from .errors import ConfigError, DomainError

LOGGER = logging.getLogger(__name__)

AmplitudeKind = Literal["type-I", "type-II", "custom"]
FilterShape = Literal["gaussian", "rectangular"]
FilterBasis = Literal["field", "intensity"]

MIN_POINTS = 1024
MIN_SINC_ZEROS = 8
DEFAULT_HALF_COUNT = 8192
DEGENERATE_NM = 702.2


__all__ = [
    "AmplitudeKind", "FilterShape", "FilterBasis", "DetuningGrid",
    "SpectralAmplitude", "FilterSpec", "omega_from_nm", "nm_from_omega",
    "build_type2", "build_type1", "apply_filters", "apply_quadratic_phase",
    "apply_window", "filter_coherence_time", "half_max_crossings",
    "spectral_fwhm_nm", "to_frame",
]


def omega_from_nm(wavelength_nm: float | np.ndarray):
    """
    Angular frequency in rad/fs of a vacuum wavelength in nm.
    """
    return 2 * np.pi * C_NM_PER_FS / np.asarray(wavelength_nm, dtype=float)


def nm_from_omega(omega: float | np.ndarray):
    return 2 * np.pi * C_NM_PER_FS / np.asarray(omega, dtype=float)


@dataclass(frozen=True)
class DetuningGrid:
    """
    Uniform detuning grid symmetric about ν = 0.

    The grid holds N = 2m + 1 points ν_k = k·dν for k = -m..m.

    Parameters
    ----------
    spacing : float
        dν in rad/fs.
    half_count : int
        m, the number of points on each side of ν = 0.
    """
    spacing: float
    half_count: int = DEFAULT_HALF_COUNT

    def __post_init__(self) -> None:
        if not self.spacing > 0 or not math.isfinite(self.spacing):
            raise ConfigError(f"grid spacing must be > 0, got {self.spacing}")
        if 2 * self.half_count + 1 < MIN_POINTS:
            raise ConfigError(
                f"grid needs at least {MIN_POINTS} points, "
                f"got {2 * self.half_count + 1}"
            )

    @classmethod
    def from_span(
        cls,
        half_span: float,
        half_count: int = DEFAULT_HALF_COUNT
    ) -> "DetuningGrid":
        return cls(half_span / half_count, half_count)

    @classmethod
    def for_type2(
        cls,
        D: float,
        L: float,
        zeros: float = 64,
        half_count: int = DEFAULT_HALF_COUNT
    ) -> "DetuningGrid":
        """
        Grid whose half-span holds `zeros` zeros of sinc(νDL/2).
        """
        first_zero = 2 * np.pi / abs(D * L)
        return cls.from_span(zeros * first_zero, half_count)

    @classmethod
    def for_type1(
        cls,
        Dpp: float,
        L: float,
        zeros: float = MIN_SINC_ZEROS,
        half_count: int = DEFAULT_HALF_COUNT
    ) -> "DetuningGrid":
        """
        Grid whose half-span holds `zeros` zeros of sinc(ν²D''L/2).
        """
        return cls.from_span(
            math.sqrt(2 * np.pi * zeros / abs(Dpp * L)), half_count
        )

    @property
    def count(self) -> int:
        return 2 * self.half_count + 1

    @property
    def half_span(self) -> float:
        return self.spacing * self.half_count

    @property
    def max_delay(self) -> float:
        """
        Largest delay (fs) resolvable without aliasing, π/dν.
        """
        return np.pi / self.spacing

    @cached_property
    def nu(self) -> np.ndarray:
        nu = self.spacing * np.arange(-self.half_count, self.half_count + 1)
        nu.setflags(write=False)
        return nu

    @cached_property
    def weights(self) -> np.ndarray:
        """
        Trapezoidal quadrature weights.
        """
        w = np.full(self.count, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        w.setflags(write=False)
        return w

    def conjugate_delays(self) -> np.ndarray:
        """
        Delays (fs) on which the FFT of a grid function is exact.
        """
        k = np.arange(-self.half_count, self.half_count + 1)
        return 2 * np.pi * k / (self.count * self.spacing)


@dataclass(frozen=True, eq=False)
class SpectralAmplitude:
    """
    Complex T(ν) sampled on a detuning grid, peak-normalized.

    Parameters
    ----------
    grid : DetuningGrid
    values : np.ndarray
        Complex amplitudes; read-only.
    center_omega : float
        Ω in rad/fs.
    kind : {"type-I", "type-II", "custom"}
    group_delay_fs : float, default 0.0
        Delay (fs) carried by the linear part of the spectral phase.
        D·L/2 for type II.
    description : str
    """
    grid: DetuningGrid
    values: np.ndarray
    center_omega: float
    kind: AmplitudeKind = "custom"
    group_delay_fs: float = 0.0
    description: str = ""

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.count,):
            raise ConfigError(
                f"amplitude has shape {values.shape}, "
                f"grid needs ({self.grid.count},)"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigError("amplitude contains non-finite values")
        if self.kind not in get_args(AmplitudeKind):
            raise ConfigError(f"unknown amplitude kind {self.kind!r}")
        if not self.center_omega > self.grid.half_span:
            raise ConfigError(
                "detuning grid reaches beyond zero idler frequency"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nu(self) -> np.ndarray:
        return self.grid.nu

    @property
    def center_nm(self) -> float:
        return float(nm_from_omega(self.center_omega))

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def signal_nm(self) -> np.ndarray:
        return nm_from_omega(self.center_omega + self.nu)

    def idler_nm(self) -> np.ndarray:
        return nm_from_omega(self.center_omega - self.nu)

    def with_values(self, values: np.ndarray, **changes) -> "SpectralAmplitude":
        return replace(self, values=values, **changes)


def _peak_normalized(values: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(values))
    if peak == 0:
        raise DomainError("amplitude vanishes on the whole grid")
    return values / peak


def build_type2(
    D: float,
    L: float,
    grid: DetuningGrid,
    center_nm: float = DEGENERATE_NM
) -> SpectralAmplitude:
    """
    Type-II amplitude sinc(νDL/2)·exp(-iνDL/2).

    Parameters
    ----------
    D : float
        Group-velocity difference in fs/µm.
    L : float
        Crystal length in µm.
    grid : DetuningGrid
        Must span at least eight zeros of the sinc on each side.
    center_nm : float, default 702.2
        Degenerate wavelength.

    Returns
    -------
    SpectralAmplitude
    """
    if D == 0 or not L > 0:
        raise ConfigError(f"type-II needs D != 0 and L > 0, got D={D}, L={L}")
    first_zero = 2 * np.pi / abs(D * L)
    if grid.half_span < MIN_SINC_ZEROS * first_zero * (1 - 1e-12):
        raise ConfigError(
            f"grid half-span {grid.half_span:.4g} rad/fs holds fewer than "
            f"{MIN_SINC_ZEROS} sinc zeros (first zero {first_zero:.4g})"
        )
    x = grid.nu * D * L / 2
    values = np.sinc(x / np.pi) * np.exp(-1j * x)
    LOGGER.debug("Type-II amplitude: DL = %.4g fs, %d points", D * L, grid.count)
    return SpectralAmplitude(
        grid=grid,
        values=_peak_normalized(values),
        center_omega=float(omega_from_nm(center_nm)),
        kind="type-II",
        group_delay_fs=D * L / 2,
        description=f"type-II sinc, D={D:.6g} fs/um, L={L:g} um",
    )


def build_type1(
    Dpp: float,
    L: float,
    grid: DetuningGrid,
    center_nm: float = DEGENERATE_NM
) -> SpectralAmplitude:
    """
    Type-I amplitude sinc(ν²D''L/2)·exp(-iν²D''L/2).
    """
    if Dpp == 0 or not L > 0:
        raise ConfigError(
            f"type-I needs D'' != 0 and L > 0, got D''={Dpp}, L={L}"
        )
    needed = math.sqrt(2 * np.pi * MIN_SINC_ZEROS / abs(Dpp * L))
    if grid.half_span < needed * (1 - 1e-12):
        raise ConfigError(
            f"grid half-span {grid.half_span:.4g} rad/fs holds fewer than "
            f"{MIN_SINC_ZEROS} sinc zeros (needs {needed:.4g})"
        )
    x = grid.nu ** 2 * Dpp * L / 2
    values = np.sinc(x / np.pi) * np.exp(-1j * x)
    return SpectralAmplitude(
        grid=grid,
        values=_peak_normalized(values),
        center_omega=float(omega_from_nm(center_nm)),
        kind="type-I",
        description=f"type-I sinc, D''={Dpp:.6g} fs^2/um, L={L:g} um",
    )


@dataclass(frozen=True)
class FilterSpec:
    """
    Spectral filter in front of a detector.

    Parameters
    ----------
    center_nm : float
    fwhm_nm : float
        Full width at half maximum; ``math.inf`` gives a flat filter.
    shape : {"gaussian", "rectangular"}, default "gaussian"
    basis : {"field", "intensity"}, default "field"
        Whether the Gaussian FWHM describes the field-amplitude
        transmission or the intensity transmission. Rectangular filters
        are the same in both.
    """
    center_nm: float = DEGENERATE_NM
    fwhm_nm: float = math.inf
    shape: FilterShape = "gaussian"
    basis: FilterBasis = "field"

    def __post_init__(self) -> None:
        if not self.fwhm_nm > 0:
            raise ConfigError(f"filter fwhm must be > 0, got {self.fwhm_nm}")
        if not self.center_nm > 0:
            raise ConfigError(f"filter center must be > 0, got {self.center_nm}")
        if self.shape not in get_args(FilterShape):
            raise ConfigError(f"unknown filter shape {self.shape!r}")
        if self.basis not in get_args(FilterBasis):
            raise ConfigError(f"unknown filter basis {self.basis!r}")

    @classmethod
    def flat(cls, center_nm: float = DEGENERATE_NM) -> "FilterSpec":
        return cls(center_nm, math.inf)

    @property
    def is_flat(self) -> bool:
        return math.isinf(self.fwhm_nm)

    def field(self, wavelength_nm: float | np.ndarray) -> np.ndarray:
        """
        Field-amplitude transmission at the given wavelengths.
        """
        lam = np.asarray(wavelength_nm, dtype=float)
        if self.is_flat:
            return np.ones_like(lam)
        offset = lam - self.center_nm
        match self.shape:
            case "rectangular":
                return (np.abs(offset) <= self.fwhm_nm / 2).astype(float)
            case "gaussian":
                profile = np.exp(-4 * np.log(2) * offset ** 2 / self.fwhm_nm ** 2)
                return profile if self.basis == "field" else np.sqrt(profile)

    def transmission(self, wavelength_nm: float | np.ndarray) -> np.ndarray:
        """
        Intensity transmission at the given wavelengths.
        """
        return self.field(wavelength_nm) ** 2


def apply_filters(
    T: SpectralAmplitude,
    f_signal: FilterSpec,
    f_idler: FilterSpec
) -> SpectralAmplitude:
    """
    Multiply T(ν) by the signal and idler field transmissions at Ω + ν
    and Ω - ν, then renormalize to unit peak.
    """
    lam_s = T.signal_nm()
    lam_i = T.idler_nm()
    for name, spec, lam in (("signal", f_signal, lam_s), ("idler", f_idler, lam_i)):
        if spec.is_flat:
            continue
        if not lam.min() <= spec.center_nm <= lam.max():
            raise DomainError(
                f"{name} filter at {spec.center_nm} nm lies outside the grid "
                f"[{lam.min():.2f}, {lam.max():.2f}] nm"
            )
    filtered = T.values * f_signal.field(lam_s) * f_idler.field(lam_i)
    peak = np.max(np.abs(filtered))
    if peak < 1e-12:
        raise DomainError("filter band lies entirely outside the amplitude")
    if peak < 1e-6:
        LOGGER.warning("Filters transmit at most %.2e of the amplitude", peak)
    label = (
        f"{T.description}; filters {f_signal.fwhm_nm:g}/{f_idler.fwhm_nm:g} nm "
        f"{f_signal.shape}"
    )
    return T.with_values(filtered / peak, description=label)


def apply_quadratic_phase(T: SpectralAmplitude, beta: float) -> SpectralAmplitude:
    """
    Add the spectral phase exp(-iβν²), β in fs².
    """
    if beta == 0:
        return T
    return T.with_values(
        T.values * np.exp(-1j * beta * T.nu ** 2),
        description=f"{T.description}; beta={beta:g} fs^2",
    )


def apply_window(
    T: SpectralAmplitude,
    weight: np.ndarray,
    label: str = "window"
) -> SpectralAmplitude:
    """
    Multiply the amplitude magnitude by √weight and renormalize.

    `weight` is an intensity-like acceptance sampled on ``T.nu``.
    """
    weight = np.asarray(weight, dtype=float)
    if weight.shape != T.values.shape:
        raise ConfigError("window and amplitude grids differ")
    if np.any(weight < 0):
        raise ConfigError("window weights must be non-negative")
    return T.with_values(
        _peak_normalized(T.values * np.sqrt(weight)),
        description=f"{T.description}; {label}",
    )


def filter_coherence_time(center_nm: float, fwhm_nm: float) -> float:
    """
    Rough coherence time λ²/(cΔλ) of a filter, in fs.
    """
    if not fwhm_nm > 0:
        raise ConfigError(f"filter fwhm must be > 0, got {fwhm_nm}")
    return center_nm ** 2 / (C_NM_PER_FS * fwhm_nm)


def half_max_crossings(
    x: np.ndarray,
    y: np.ndarray
) -> tuple[float, float, bool]:
    """
    Outermost half-maximum crossings of a sampled curve.

    Parameters
    ----------
    x : np.ndarray
        Increasing abscissae.
    y : np.ndarray
        Non-negative ordinates.

    Returns
    -------
    tuple of (float, float, bool)
        Left crossing, right crossing (linear interpolation between
        bracketing samples), and whether the curve crosses half height
        more than twice.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    peak_index = int(np.argmax(y))
    half = y[peak_index] / 2
    above = y >= half
    if above[0] or above[-1]:
        raise ValueError("curve is above half maximum at the array boundary")

    edges = np.flatnonzero(np.diff(above.astype(int)))
    multimodal = edges.size > 2
    left, right = edges[0], edges[-1]

    def crossing(i: int) -> float:
        x0, x1, y0, y1 = x[i], x[i + 1], y[i], y[i + 1]
        return float(x0 + (half - y0) * (x1 - x0) / (y1 - y0))

    return crossing(left), crossing(right), multimodal


def spectral_fwhm_nm(T: SpectralAmplitude) -> float:
    """
    FWHM of |T|² converted to wavelength with λ = 2πc/(Ω + ν).
    """
    lo, hi, _ = half_max_crossings(T.nu, T.power)
    lam = nm_from_omega(T.center_omega + np.array([lo, hi]))
    return float(abs(lam[0] - lam[1]))


def to_frame(T: SpectralAmplitude) -> pd.DataFrame:
    return pd.DataFrame({
        "nu_rad_per_fs": T.nu,
        "re": T.values.real,
        "im": T.values.imag,
        "abs": np.abs(T.values),
    })
