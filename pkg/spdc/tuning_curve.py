"""
Non-collinear type-I emission geometry: tuning curves, aperture
acceptance and the spectral window inside which both photons of a pair
reach their apertures.

The pump is an extraordinary plane wave along the z axis at a fixed
angle to the optic axis; signal and idler are ordinary and leave on
opposite sides of the pump in one plane. The exit face is normal to the
pump, so external angles follow from sin θ_ext = n sin θ_int.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, get_args

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .crystal_optics import CrystalConfig, solve_collinear_pm_angle, wavenumber
from .errors import ConfigError, DomainError, NumericalError
from .interferometry import hom_closed
from .montecarlo_detection import CountingConfig, expected_counts, expected_visibility
from .spectral_model import (
    FilterSpec, SpectralAmplitude, apply_window,
    half_max_crossings, nm_from_omega, omega_from_nm
)

LOGGER = logging.getLogger(__name__)

Branch = Literal["signal", "idler"]

DEFAULT_PUMP_NM = 351.1
DEFAULT_EMISSION_DEG = 3.0
DEFAULT_APERTURE_MM = 3.0
COINCIDENCE_ARM_MM = 2800.0
MICHELSON_ARM_MM = 2000.0
MOMENTUM_TOL = 1e-8


__all__ = [
    "Branch", "conjugate_wavelength", "emission_angles", "momentum_residuals",
    "EmissionGeometry", "calibrate_pump_angle", "TuningCurve", "tuning_curve",
    "ApertureGeometry", "PairWindow", "pair_window",
    "predict_two_photon_envelope", "counting_config_from_window",
    "calibrate_brightness",
]


def conjugate_wavelength(signal_nm: float, pump_nm: float = DEFAULT_PUMP_NM) -> float:
    """
    Partner wavelength 1/(1/λ_p - 1/λ_s) fixed by energy conservation.
    """
    if not signal_nm > pump_nm > 0:
        raise DomainError(
            f"signal wavelength {signal_nm} nm must exceed pump {pump_nm} nm"
        )
    return 1 / (1 / pump_nm - 1 / signal_nm)


def _solve_internal_angle(k_s: float, k_i: float, k_p: float) -> float:
    # longitudinal balance with the transverse one substituted in
    def longitudinal(phi: float) -> float:
        return (
            k_s * math.cos(phi)
            + math.sqrt(max(k_i ** 2 - (k_s * math.sin(phi)) ** 2, 0.0))
            - k_p
        )

    at_zero = longitudinal(0.0)
    if abs(at_zero) < MOMENTUM_TOL:
        return 0.0
    if at_zero < 0:
        raise DomainError("outside tuning range: no non-collinear solution")
    phi_max = math.pi / 2 if k_s <= k_i else math.asin(k_i / k_s)
    phi_max -= 1e-12
    if longitudinal(phi_max) > 0:
        raise DomainError("outside tuning range: no non-collinear solution")
    return brentq(longitudinal, 0.0, phi_max, xtol=1e-15, maxiter=200)


def emission_angles(
    signal_nm: float,
    pump_nm: float,
    cfg: CrystalConfig,
    pump_angle_to_axis: float
) -> tuple[float, float]:
    """
    External emission angles of a type-I pair.

    Parameters
    ----------
    signal_nm : float
        Signal wavelength; the idler follows from energy conservation.
    pump_nm : float
    cfg : CrystalConfig
    pump_angle_to_axis : float
        Angle between the pump and the optic axis in degrees.

    Returns
    -------
    tuple of (float, float)
        θ_s_ext and θ_i_ext in degrees from the pump axis; the idler
        angle is negative.

    Raises
    ------
    DomainError
        If the wavelength is outside the tuning range.
    """
    idler_nm = conjugate_wavelength(signal_nm, pump_nm)
    k_p = float(wavenumber(pump_nm, "e", pump_angle_to_axis, cfg))
    k_s = float(wavenumber(signal_nm, "o", 0.0, cfg))
    k_i = float(wavenumber(idler_nm, "o", 0.0, cfg))
    phi_s = _solve_internal_angle(k_s, k_i, k_p)
    phi_i = math.asin(k_s * math.sin(phi_s) / k_i)

    n_s = k_s * signal_nm * 1e-3 / (2 * math.pi)
    n_i = k_i * idler_nm * 1e-3 / (2 * math.pi)
    sin_s, sin_i = n_s * math.sin(phi_s), n_i * math.sin(phi_i)
    if sin_s >= 1 or sin_i >= 1:
        raise DomainError("emission is totally internally reflected at the exit face")
    return math.degrees(math.asin(sin_s)), -math.degrees(math.asin(sin_i))


def momentum_residuals(
    signal_nm: float,
    pump_nm: float,
    cfg: CrystalConfig,
    pump_angle_to_axis: float,
    theta_s_ext: float,
    theta_i_ext: float
) -> tuple[float, float]:
    """
    Longitudinal and transverse momentum mismatch in 1/µm of a pair
    emitted at the given external angles.
    """
    idler_nm = conjugate_wavelength(signal_nm, pump_nm)
    k_p = float(wavenumber(pump_nm, "e", pump_angle_to_axis, cfg))
    n_s = float(cfg.sellmeier_o.index(signal_nm))
    n_i = float(cfg.sellmeier_o.index(idler_nm))
    k_s = 2 * math.pi * n_s / (signal_nm * 1e-3)
    k_i = 2 * math.pi * n_i / (idler_nm * 1e-3)
    phi_s = math.asin(math.sin(math.radians(theta_s_ext)) / n_s)
    phi_i = math.asin(math.sin(math.radians(-theta_i_ext)) / n_i)
    return (
        k_p - k_s * math.cos(phi_s) - k_i * math.cos(phi_i),
        k_s * math.sin(phi_s) - k_i * math.sin(phi_i),
    )


@dataclass(frozen=True)
class EmissionGeometry:
    """
    Crystal orientation for non-collinear type-I emission.

    Parameters
    ----------
    crystal : CrystalConfig
    pump_angle_deg : float
        Pump angle to the optic axis.
    pump_nm : float, default 351.1
    calibrated : bool, default False
        Whether `pump_angle_deg` came from :func:`calibrate_pump_angle`.
    """
    crystal: CrystalConfig
    pump_angle_deg: float
    pump_nm: float = DEFAULT_PUMP_NM
    calibrated: bool = False

    @property
    def degenerate_nm(self) -> float:
        return 2 * self.pump_nm

    def emission_angles(self, signal_nm: float) -> tuple[float, float]:
        return emission_angles(signal_nm, self.pump_nm, self.crystal, self.pump_angle_deg)


def calibrate_pump_angle(
    cfg: CrystalConfig,
    pump_nm: float = DEFAULT_PUMP_NM,
    target_ext_deg: float = DEFAULT_EMISSION_DEG
) -> EmissionGeometry:
    """
    Pump angle to the optic axis that puts degenerate emission at
    ±`target_ext_deg` outside the crystal.
    """
    if not 0 < target_ext_deg < 30:
        raise ConfigError(f"target angle must be within (0, 30) degrees, got {target_ext_deg}")
    degenerate = 2 * pump_nm
    collinear = solve_collinear_pm_angle(pump_nm, degenerate, "I", cfg)

    def miss(theta: float) -> float:
        return emission_angles(degenerate, pump_nm, cfg, theta)[0] - target_ext_deg

    lo, hi = collinear + 1e-6, min(collinear + 20.0, 90.0)
    if miss(hi) < 0:
        raise DomainError(f"cannot reach {target_ext_deg} degree emission")
    theta = brentq(miss, lo, hi, xtol=1e-12, maxiter=200)
    LOGGER.info(
        "Calibrated pump angle %.6f deg (collinear %.6f deg) for %.3g deg emission",
        theta, collinear, target_ext_deg
    )
    return EmissionGeometry(cfg, theta, pump_nm, calibrated=True)


@dataclass(frozen=True, eq=False)
class TuningCurve:
    wavelength_nm: np.ndarray
    theta_ext_deg: np.ndarray
    branch: Branch

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "lambda_nm": self.wavelength_nm,
            "theta_ext_deg": self.theta_ext_deg,
            "branch": self.branch,
        })


def tuning_curve(
    geometry: EmissionGeometry,
    wavelengths_nm,
    branch: Branch = "signal"
) -> TuningCurve:
    """
    External emission angle of a photon of each wavelength on one
    branch. A photon on the idler branch is the partner of a signal at
    the conjugate wavelength.
    """
    if branch not in get_args(Branch):
        raise ConfigError(f"unknown branch {branch!r}")
    lam = np.atleast_1d(np.asarray(wavelengths_nm, dtype=float))
    theta = np.empty(lam.size)
    for j, wavelength in enumerate(lam):
        match branch:
            case "signal":
                theta[j] = geometry.emission_angles(wavelength)[0]
            case "idler":
                partner = conjugate_wavelength(wavelength, geometry.pump_nm)
                theta[j] = geometry.emission_angles(partner)[1]
    return TuningCurve(lam, theta, branch)


@dataclass(frozen=True)
class ApertureGeometry:
    """
    Circular aperture seen from the crystal.

    Parameters
    ----------
    center_angle_deg : float
        Direction of the aperture center from the pump axis.
    distance_mm : float
        Crystal to aperture.
    diameter_mm : float
        ``math.inf`` accepts every angle.
    """
    center_angle_deg: float
    distance_mm: float = COINCIDENCE_ARM_MM
    diameter_mm: float = DEFAULT_APERTURE_MM

    def __post_init__(self) -> None:
        if not self.distance_mm > 0 or not self.diameter_mm > 0:
            raise ConfigError("aperture distance and diameter must be > 0")

    @classmethod
    def standard(cls, side: int = 1, distance_mm: float = COINCIDENCE_ARM_MM) -> "ApertureGeometry":
        return cls(math.copysign(DEFAULT_EMISSION_DEG, side), distance_mm, DEFAULT_APERTURE_MM)

    @classmethod
    def unlimited(cls, center_angle_deg: float = 0.0) -> "ApertureGeometry":
        return cls(center_angle_deg, COINCIDENCE_ARM_MM, math.inf)

    @property
    def half_acceptance_deg(self) -> float:
        return math.degrees(math.atan(self.diameter_mm / 2 / self.distance_mm))

    def accepts(self, theta_ext_deg) -> np.ndarray:
        return np.abs(np.asarray(theta_ext_deg) - self.center_angle_deg) <= self.half_acceptance_deg


@dataclass(frozen=True, eq=False)
class PairWindow:
    """
    Spectral acceptance of pair detection.

    All densities are per unit detuning and share an arbitrary scale.

    Parameters
    ----------
    nu : np.ndarray
        Detuning grid in rad/fs.
    center_omega : float
    geometric : np.ndarray
        Probability that both photons emitted at detuning ν reach
        their apertures.
    weight : np.ndarray
        w(ν) = geometric·T_s(ν)·T_i(-ν), within [0, 1].
    singles : np.ndarray
        Emission into the signal aperture, unfiltered.
    pair_density : np.ndarray
        Emission with both photons inside the apertures and through the
        filters.
    filters : tuple of FilterSpec
    pair_fraction : float
        Fraction of filtered signal singles whose partner is detectable.
    effective_pair_fwhm_nm, singles_fwhm_nm : float
        ``math.inf`` when the curve never falls to half height.
    """
    nu: np.ndarray
    center_omega: float
    geometric: np.ndarray
    weight: np.ndarray
    singles: np.ndarray
    pair_density: np.ndarray
    filters: tuple[FilterSpec, FilterSpec]
    pair_fraction: float
    effective_pair_fwhm_nm: float
    singles_fwhm_nm: float
    metadata: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.nu[1] - self.nu[0])

    @property
    def pair_total(self) -> float:
        return float(np.sum(self.pair_density) * self.spacing)

    @property
    def singles_total(self) -> float:
        """
        Filtered signal singles.
        """
        lam_s = nm_from_omega(self.center_omega + self.nu)
        filtered = self.singles * self.filters[0].transmission(lam_s)
        return float(np.sum(filtered) * self.spacing)

    def weight_on(self, T: SpectralAmplitude) -> np.ndarray:
        """
        w(ν) on the grid of `T`, with the filters evaluated exactly and
        the geometric part interpolated.
        """
        geometric = np.interp(T.nu, self.nu, self.geometric, left=0.0, right=0.0)
        f_s, f_i = self.filters
        return geometric * f_s.transmission(T.signal_nm()) * f_i.transmission(T.idler_nm())

    def accidental_ratio(self, brightness: float, window_ns: float = 3.0) -> float:
        """
        Accidental to true coincidences at the 1/2 baseline.
        """
        cfg = counting_config_from_window(self, brightness, window_ns=window_ns)
        counts = expected_counts(cfg, 0.5)
        return counts.accidentals / counts.pairs

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "nu_rad_per_fs": self.nu,
            "weight": self.weight,
            "singles": self.singles,
            "pair_density": self.pair_density,
        })

    def summary(self) -> dict:
        return {
            "effective_pair_fwhm_nm": self.effective_pair_fwhm_nm,
            "singles_fwhm_nm": self.singles_fwhm_nm,
            "pair_fraction": self.pair_fraction,
            **self.metadata,
        }


def _fwhm_nm(nu: np.ndarray, values: np.ndarray, center_omega: float) -> float:
    try:
        lo, hi, _ = half_max_crossings(nu, values)
    except ValueError:
        return math.inf
    lam = nm_from_omega(center_omega + np.array([lo, hi]))
    return float(abs(lam[0] - lam[1]))


def pair_window(
    geometry: EmissionGeometry,
    ap_s: ApertureGeometry,
    ap_i: ApertureGeometry,
    filters: Optional[tuple[FilterSpec, FilterSpec]] = None,
    *,
    nu_max: float = 0.85,
    nu_step: float = 5e-4,
    angle_range_deg: tuple[float, float] = (0.0, 12.0),
    angle_step_deg: float = 2e-3,
    chunk: int = 128
) -> PairWindow:
    """
    Spectral window of detectable pairs.

    For each detuning ν the emission is spread over external signal
    angles θ with weight sinc²(Δk(ν, θ)L/2), Δk being the longitudinal
    mismatch once transverse momentum is balanced. The idler leaves at
    sin θ_i = -(λ_i/λ_s) sin θ. Apertures are hard top-hats in external
    angle.

    Parameters
    ----------
    geometry : EmissionGeometry
    ap_s, ap_i : ApertureGeometry
        Signal and idler apertures; the idler center is negative.
    filters : tuple of FilterSpec, optional
        Signal and idler filters; flat by default.
    nu_max, nu_step : float
        Detuning grid in rad/fs.
    angle_range_deg : tuple of float
        External signal angles integrated over.
    angle_step_deg : float
    chunk : int
        Detunings per vectorized block.

    Returns
    -------
    PairWindow

    Raises
    ------
    DomainError
        If no pair reaches both apertures.
    """
    if filters is None:
        filters = (FilterSpec.flat(), FilterSpec.flat())
    if not 0 < nu_step < nu_max:
        raise ConfigError("need 0 < nu_step < nu_max")
    lo_deg, hi_deg = angle_range_deg
    if not 0 <= lo_deg < hi_deg < 90 or not angle_step_deg > 0:
        raise ConfigError(f"invalid angle range {angle_range_deg}")

    cfg = geometry.crystal
    center_omega = float(omega_from_nm(geometry.degenerate_nm))
    half = int(round(nu_max / nu_step))
    nu = nu_step * np.arange(-half, half + 1)
    lam_s = nm_from_omega(center_omega + nu)
    lam_i = nm_from_omega(center_omega - nu)
    n_s = cfg.sellmeier_o.index(lam_s)
    n_i = cfg.sellmeier_o.index(lam_i)
    k_s = 2 * np.pi * n_s / (lam_s * 1e-3)
    k_i = 2 * np.pi * n_i / (lam_i * 1e-3)
    k_p = float(wavenumber(geometry.pump_nm, "e", geometry.pump_angle_deg, cfg))

    theta = np.arange(lo_deg, hi_deg + angle_step_deg / 2, angle_step_deg)
    sin_ext = np.sin(np.radians(theta))
    in_signal = ap_s.accepts(theta)

    emitted = np.empty(nu.size)
    singles = np.empty(nu.size)
    both = np.empty(nu.size)
    length = cfg.length_um
    for start in range(0, nu.size, chunk):
        rows = slice(start, start + chunk)
        sin_phi = sin_ext[None, :] / n_s[rows, None]
        transverse = k_s[rows, None] * sin_phi
        longitudinal = (
            k_s[rows, None] * np.sqrt(1 - sin_phi ** 2)
            + np.sqrt(np.clip(k_i[rows, None] ** 2 - transverse ** 2, 0.0, None))
        )
        mismatch = k_p - longitudinal
        density = np.sinc(mismatch * length / (2 * np.pi)) ** 2
        sin_idler = np.clip(
            (lam_i[rows, None] / lam_s[rows, None]) * sin_ext[None, :], -1.0, 1.0
        )
        theta_i = -np.degrees(np.arcsin(sin_idler))
        accepted = in_signal[None, :] & ap_i.accepts(theta_i)
        emitted[rows] = density.sum(axis=1) * angle_step_deg
        singles[rows] = (density * in_signal[None, :]).sum(axis=1) * angle_step_deg
        both[rows] = (density * accepted).sum(axis=1) * angle_step_deg

    geometric = np.divide(both, emitted, out=np.zeros_like(both), where=emitted > 0)
    if not np.any(geometric > 0):
        raise DomainError("apertures misaligned: no pair reaches both apertures")

    f_s, f_i = filters
    t_s, t_i = f_s.transmission(lam_s), f_i.transmission(lam_i)
    weight = np.clip(geometric * t_s * t_i, 0.0, 1.0)
    pair_density = both * t_s * t_i
    filtered_singles = float(np.sum(singles * t_s))
    if filtered_singles == 0:
        raise DomainError("no signal singles pass the signal aperture and filter")
    pair_fraction = float(np.sum(pair_density) / filtered_singles)
    if pair_fraction > 1 + 1e-12:
        raise NumericalError("pair fraction exceeds one", pair_fraction)

    window = PairWindow(
        nu=nu,
        center_omega=center_omega,
        geometric=geometric,
        weight=weight,
        singles=singles,
        pair_density=pair_density,
        filters=(f_s, f_i),
        pair_fraction=min(pair_fraction, 1.0),
        effective_pair_fwhm_nm=_fwhm_nm(nu, weight, center_omega),
        singles_fwhm_nm=_fwhm_nm(nu, singles, center_omega),
        metadata={
            "pump_angle_deg": geometry.pump_angle_deg,
            "pump_angle_calibrated": geometry.calibrated,
            "signal_aperture_deg": ap_s.center_angle_deg,
            "idler_aperture_deg": ap_i.center_angle_deg,
            "half_acceptance_deg": ap_s.half_acceptance_deg,
        },
    )
    LOGGER.info(
        "Pair window: FWHM %.3g nm, singles FWHM %.3g nm, pair fraction %.3f",
        window.effective_pair_fwhm_nm, window.singles_fwhm_nm, window.pair_fraction
    )
    return window


def predict_two_photon_envelope(
    pw: PairWindow,
    T: SpectralAmplitude,
    tau,
    **options
):
    """
    Coincidence-dip envelope g¹(2τ) of `T` restricted to the pair
    window.

    Returns
    -------
    CorrelationTrace
    """
    weight = pw.weight_on(T)
    if not np.any(weight > 0):
        raise DomainError("pair window and amplitude do not overlap")
    restricted = apply_window(T, weight, label="pair window")
    return hom_closed(restricted, tau, "minus", **options).envelope_trace()


def counting_config_from_window(
    pw: PairWindow,
    brightness: float,
    **counting
) -> CountingConfig:
    """
    Pair and excess singles rates for the counting simulation.

    `brightness` converts the window's density units to events per
    second; other keyword arguments go to :class:`CountingConfig`.
    """
    if not brightness >= 0:
        raise ConfigError(f"brightness must be >= 0, got {brightness}")
    pair_rate = brightness * pw.pair_total
    singles_rate = brightness * pw.singles_total
    return CountingConfig(
        pair_rate=pair_rate,
        singles_excess_rate=max(singles_rate - pair_rate, 0.0),
        **counting,
    )


def calibrate_brightness(
    pw: PairWindow,
    true_visibility: float = 0.86,
    raw_visibility: float = 0.32,
    window_ns: float = 3.0
) -> float:
    """
    Brightness at which accidentals pull `true_visibility` down to
    `raw_visibility`.

    Absolute rates are unknown, so this is the one free constant of the
    counting model.
    """
    if not 0 < raw_visibility < true_visibility <= 1:
        raise DomainError(
            f"need 0 < raw < true <= 1, got raw={raw_visibility}, true={true_visibility}"
        )
    dip, peak = 0.5 * (1 - true_visibility), 0.5 * (1 + true_visibility)

    def miss(log_brightness: float) -> float:
        cfg = counting_config_from_window(pw, 10 ** log_brightness, window_ns=window_ns)
        return expected_visibility(cfg, dip, peak).raw - raw_visibility

    lo, hi = -12.0, 18.0
    if miss(lo) * miss(hi) > 0:
        raise DomainError("raw visibility cannot be reached by scaling brightness")
    log_k = brentq(miss, lo, hi, xtol=1e-10)
    return 10 ** log_k
