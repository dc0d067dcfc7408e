"""
Refractive indices, group parameters and collinear phase matching for
a uniaxial birefringent crystal.

Wavelengths are passed in nanometres and converted to micrometres
internally, so that wavenumbers come out in 1/µm, group delays in fs/µm
and group-velocity dispersion in fs²/µm. Walk-off is ignored and the
e-ray group parameters are evaluated at a fixed propagation angle.
"""
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple, Optional, get_args

import numpy as np
from scipy.constants import c as _C_M_PER_S
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, NumericalError

LOGGER = logging.getLogger(__name__)

# Speed of light in µm/fs
C_UM_PER_FS = _C_M_PER_S * 1e-9
# Speed of light in nm/fs
C_NM_PER_FS = _C_M_PER_S * 1e-6

DATA_DIR_ENV = "SPDC_DATA_DIR"
PACKAGE_DATA_DIR = Path(__file__).resolve().parent / "data"

FormulaVariant = Literal["eimerl", "sellmeier"]
Polarization = Literal["o", "e"]
PMType = Literal["I", "II"]

PM_RESIDUAL_TOL = 1e-8
RICHARDSON_TOL = 1e-3
FIRST_DERIVATIVE_STEP = 1e-5
SECOND_DERIVATIVE_STEP = 1e-4


__all__ = [
    "C_UM_PER_FS", "C_NM_PER_FS", "FormulaVariant", "Polarization", "PMType",
    "SellmeierSet", "CrystalConfig", "GroupParams", "data_dir",
    "load_sellmeier", "index_ordinary", "index_extraordinary", "index",
    "wavenumber", "group_index", "group_delay", "group_delay_numeric",
    "group_delay_mismatch", "gvd", "gvd_numeric", "group_params",
    "phase_mismatch", "solve_collinear_pm_angle",
]


@dataclass(frozen=True)
class SellmeierSet:
    """
    One dispersion formula with its coefficients.

    Parameters
    ----------
    name : str
        Label of the coefficient set.
    formula_variant : {"eimerl", "sellmeier"}
        ``"eimerl"``: n² = A + B/(λ² - C) - Dλ².
        ``"sellmeier"``: n² = 1 + Σ Bᵢλ²/(λ² - Cᵢ), coefficients given
        as B₁, C₁, B₂, C₂, ...
        λ is in micrometres in both.
    coefficients : tuple of float
        Formula coefficients (dimensionless or µm²).
    valid_range_nm : tuple of (float, float)
        Wavelength range over which the formula may be evaluated.
    """
    name: str
    formula_variant: FormulaVariant
    coefficients: tuple[float, ...]
    valid_range_nm: tuple[float, float]

    def __post_init__(self) -> None:
        if self.formula_variant not in get_args(FormulaVariant):
            raise ConfigError(
                f"unknown formula_variant {self.formula_variant!r} "
                f"for {self.name!r}"
            )
        expected = 4 if self.formula_variant == "eimerl" else None
        if expected is not None and len(self.coefficients) != expected:
            raise ConfigError(
                f"{self.name!r} needs {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        if (self.formula_variant == "sellmeier"
                and (not self.coefficients or len(self.coefficients) % 2)):
            raise ConfigError(
                f"{self.name!r} needs coefficient pairs (B, C)"
            )
        lo, hi = self.valid_range_nm
        if not 0 < lo < hi:
            raise ConfigError(f"invalid valid_range_nm for {self.name!r}")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "SellmeierSet":
        """
        Read a coefficient set from a JSON document with keys
        ``name``, ``formula_variant``, ``coefficients`` and
        ``valid_range_nm``.
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"sellmeier file not found: {path}")
        try:
            with open(path) as f:
                doc = json.load(f)
            return cls(
                name=str(doc["name"]),
                formula_variant=doc["formula_variant"],
                coefficients=tuple(float(v) for v in doc["coefficients"]),
                valid_range_nm=(
                    float(doc["valid_range_nm"][0]),
                    float(doc["valid_range_nm"][1]),
                ),
            )
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as e:
            raise ConfigError(f"malformed sellmeier file {path}: {e}") from e

    def check_range(self, wavelength_nm: float | np.ndarray) -> None:
        lo, hi = self.valid_range_nm
        lam = np.asarray(wavelength_nm, dtype=float)
        if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
            raise DomainError(
                f"wavelength {_describe(lam)} nm outside valid range "
                f"[{lo}, {hi}] nm of {self.name!r}"
            )

    def _n_squared(
        self,
        lam_um: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # n² and its first two derivatives with respect to λ (µm)
        x = lam_um ** 2
        match self.formula_variant:
            case "eimerl":
                a, b, c, d = self.coefficients
                q = x - c
                f = a + b / q - d * x
                df = 2 * lam_um * (-b / q ** 2 - d)
                d2f = 2 * (-b / q ** 2 - d) + 8 * b * x / q ** 3
            case "sellmeier":
                f = np.ones_like(x)
                dfdx = np.zeros_like(x)
                d2fdx2 = np.zeros_like(x)
                pairs = zip(self.coefficients[::2], self.coefficients[1::2])
                for b, c in pairs:
                    q = x - c
                    f = f + b * x / q
                    dfdx = dfdx - b * c / q ** 2
                    d2fdx2 = d2fdx2 + 2 * b * c / q ** 3
                df = 2 * lam_um * dfdx
                d2f = 2 * dfdx + 4 * x * d2fdx2
            case variant:
                raise ConfigError(f"unknown formula_variant {variant!r}")
        return f, df, d2f

    def derivatives(
        self,
        wavelength_nm: float | np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Evaluate the index and its wavelength derivatives.

        Parameters
        ----------
        wavelength_nm : float or np.ndarray
            Vacuum wavelength in nm.

        Returns
        -------
        tuple of np.ndarray
            ``(n, dn/dλ, d²n/dλ²)`` with λ in micrometres.
        """
        self.check_range(wavelength_nm)
        lam_um = np.asarray(wavelength_nm, dtype=float) * 1e-3
        f, df, d2f = self._n_squared(lam_um)
        if np.any(f <= 1):
            raise DomainError(
                f"{self.name!r} gives n <= 1 at {_describe(wavelength_nm)} nm"
            )
        n = np.sqrt(f)
        dn = df / (2 * n)
        d2n = (d2f - 2 * dn ** 2) / (2 * n)
        return n, dn, d2n

    def index(self, wavelength_nm: float | np.ndarray) -> np.ndarray:
        return self.derivatives(wavelength_nm)[0]


def data_dir() -> Path:
    """
    Directory holding Sellmeier JSON files; ``SPDC_DATA_DIR`` wins over
    the packaged defaults.
    """
    override = os.environ.get(DATA_DIR_ENV)
    return Path(override) if override else PACKAGE_DATA_DIR


def load_sellmeier(
    name: str = "bbo",
    directory: Optional[str | os.PathLike] = None
) -> tuple[SellmeierSet, SellmeierSet]:
    """
    Load the ordinary and extraordinary coefficient sets of a crystal.

    The files are ``<name>_o.json`` and ``<name>_e.json``.

    Parameters
    ----------
    name : str, default "bbo"
        Crystal file stem.
    directory : path, optional
        Data directory. Defaults to :func:`data_dir`.

    Returns
    -------
    tuple of (SellmeierSet, SellmeierSet)
        Ordinary and extraordinary sets.
    """
    base = Path(directory) if directory is not None else data_dir()
    LOGGER.debug("Loading sellmeier sets %r from %s", name, base)
    return (
        SellmeierSet.from_file(base / f"{name}_o.json"),
        SellmeierSet.from_file(base / f"{name}_e.json"),
    )


@dataclass(frozen=True)
class CrystalConfig:
    """
    Nonlinear crystal description.

    Parameters
    ----------
    length_um : float
        Crystal thickness L in µm.
    cut_angle_deg : float
        Angle between the optic axis and the surface normal.
    sellmeier_o, sellmeier_e : SellmeierSet
        Principal ordinary and extraordinary dispersion.
    """
    length_um: float
    cut_angle_deg: float
    sellmeier_o: SellmeierSet
    sellmeier_e: SellmeierSet

    def __post_init__(self) -> None:
        if not self.length_um > 0:
            raise ConfigError(f"crystal length must be > 0, got {self.length_um}")
        if not 0 <= self.cut_angle_deg <= 90:
            raise ConfigError(
                f"cut angle must be within [0, 90] degrees, "
                f"got {self.cut_angle_deg}"
            )

    @classmethod
    def bbo(
        cls,
        length_um: float = 2000.0,
        cut_angle_deg: float = 45.0,
        directory: Optional[str | os.PathLike] = None
    ) -> "CrystalConfig":
        s_o, s_e = load_sellmeier("bbo", directory)
        return cls(length_um, cut_angle_deg, s_o, s_e)


class GroupParams(NamedTuple):
    D: float
    Dpp: float
    wavelength_nm: float
    angle_deg: float


def _describe(value: float | np.ndarray) -> str:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return f"{arr[0]:g}"
    return f"[{np.nanmin(arr):g}, {np.nanmax(arr):g}]"


def _check_angle(theta_deg: float | np.ndarray) -> None:
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(theta < 0) or np.any(theta > 90):
        raise DomainError(
            f"propagation angle {_describe(theta)} degrees outside [0, 90]"
        )


def index_ordinary(wavelength_nm: float | np.ndarray, s: SellmeierSet):
    """
    Ordinary refractive index n_o(λ).
    """
    return s.index(wavelength_nm)


def index_extraordinary(
    wavelength_nm: float | np.ndarray,
    theta_deg: float | np.ndarray,
    s_o: SellmeierSet,
    s_e: SellmeierSet
):
    """
    Extraordinary index at angle θ from the optic axis, from the index
    ellipse 1/n² = cos²θ/n_o² + sin²θ/n_e².
    """
    return _ellipse_derivatives(wavelength_nm, theta_deg, s_o, s_e)[0]


def _ellipse_derivatives(
    wavelength_nm: float | np.ndarray,
    theta_deg: float | np.ndarray,
    s_o: SellmeierSet,
    s_e: SellmeierSet
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _check_angle(theta_deg)
    no, dno, d2no = s_o.derivatives(wavelength_nm)
    ne, dne, d2ne = s_e.derivatives(wavelength_nm)
    theta = np.radians(np.asarray(theta_deg, dtype=float))
    cos2 = np.cos(theta) ** 2
    sin2 = np.sin(theta) ** 2

    u = cos2 / no ** 2 + sin2 / ne ** 2
    du = -2 * cos2 * dno / no ** 3 - 2 * sin2 * dne / ne ** 3
    d2u = (
        cos2 * (6 * dno ** 2 / no ** 4 - 2 * d2no / no ** 3)
        + sin2 * (6 * dne ** 2 / ne ** 4 - 2 * d2ne / ne ** 3)
    )
    n = u ** -0.5
    dn = -0.5 * u ** -1.5 * du
    d2n = 0.75 * u ** -2.5 * du ** 2 - 0.5 * u ** -1.5 * d2u

    # Along the optic axis the e-ray is the o-ray
    on_axis = theta == 0
    n = np.where(on_axis, no, n)
    dn = np.where(on_axis, dno, dn)
    d2n = np.where(on_axis, d2no, d2n)
    return n, dn, d2n


def _index_derivatives(
    wavelength_nm: float | np.ndarray,
    polarization: Polarization,
    theta_deg: float | np.ndarray,
    cfg: CrystalConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    match polarization:
        case "o":
            return cfg.sellmeier_o.derivatives(wavelength_nm)
        case "e":
            return _ellipse_derivatives(
                wavelength_nm, theta_deg, cfg.sellmeier_o, cfg.sellmeier_e
            )
        case _:
            raise ConfigError(f"unknown polarization {polarization!r}")


def index(
    wavelength_nm: float | np.ndarray,
    polarization: Polarization,
    theta_deg: float | np.ndarray,
    cfg: CrystalConfig
):
    return _index_derivatives(wavelength_nm, polarization, theta_deg, cfg)[0]


def wavenumber(
    wavelength_nm: float | np.ndarray,
    polarization: Polarization,
    theta_deg: float | np.ndarray,
    cfg: CrystalConfig
):
    """
    In-crystal wavenumber K = 2πn/λ in 1/µm.
    """
    n = index(wavelength_nm, polarization, theta_deg, cfg)
    return 2 * np.pi * n / (np.asarray(wavelength_nm, dtype=float) * 1e-3)


def group_index(
    wavelength_nm: float | np.ndarray,
    polarization: Polarization,
    theta_deg: float | np.ndarray,
    cfg: CrystalConfig
):
    """
    Group index n - λ dn/dλ.
    """
    n, dn, _ = _index_derivatives(wavelength_nm, polarization, theta_deg, cfg)
    return n - np.asarray(wavelength_nm, dtype=float) * 1e-3 * dn


def group_delay(
    wavelength_nm: float | np.ndarray,
    polarization: Polarization,
    theta_deg: float | np.ndarray,
    cfg: CrystalConfig
):
    """
    Inverse group velocity dK/dΩ in fs/µm.
    """
    return group_index(wavelength_nm, polarization, theta_deg, cfg) / C_UM_PER_FS


def _wavenumber_of_omega(
    omega: float,
    polarization: Polarization,
    theta_deg: float,
    cfg: CrystalConfig
) -> float:
    wavelength_nm = 2 * np.pi * C_NM_PER_FS / omega
    return float(wavenumber(wavelength_nm, polarization, theta_deg, cfg))


def group_delay_numeric(
    wavelength_nm: float,
    polarization: Polarization,
    theta_deg: float,
    cfg: CrystalConfig,
    rel_step: float = FIRST_DERIVATIVE_STEP
) -> float:
    """
    Central finite-difference dK/dΩ, used to cross-check the analytic
    derivative.
    """
    omega = 2 * np.pi * C_NM_PER_FS / wavelength_nm
    h = rel_step * omega
    k_plus = _wavenumber_of_omega(omega + h, polarization, theta_deg, cfg)
    k_minus = _wavenumber_of_omega(omega - h, polarization, theta_deg, cfg)
    result = (k_plus - k_minus) / (2 * h)
    if not math.isfinite(result):
        raise NumericalError("non-convergent group-delay derivative", result)
    return result


def group_delay_mismatch(
    cfg: CrystalConfig,
    wavelength_nm: float,
    theta_pm_deg: float,
    *,
    signal: Polarization = "e",
    method: Literal["analytic", "numeric"] = "analytic"
) -> float:
    """
    Type-II group-velocity difference D = dK_i/dΩ_i - dK_s/dΩ_s.

    Parameters
    ----------
    cfg : CrystalConfig
        Crystal.
    wavelength_nm : float
        Degenerate signal/idler wavelength.
    theta_pm_deg : float
        Phase-matching angle at which the e-ray is evaluated.
    signal : {"e", "o"}, default "e"
        Polarization of the signal photon; the idler has the other one.
        Swapping flips the sign of D.
    method : {"analytic", "numeric"}, default "analytic"
        Analytic Sellmeier derivatives or central finite differences.

    Returns
    -------
    float
        D in fs/µm.
    """
    if signal not in ("o", "e"):
        raise ConfigError(f"unknown signal polarization {signal!r}")
    idler: Polarization = "o" if signal == "e" else "e"
    match method:
        case "analytic":
            delay = group_delay
        case "numeric":
            delay = group_delay_numeric
        case _:
            raise ConfigError(f"unknown derivative method {method!r}")
    d = float(
        delay(wavelength_nm, idler, theta_pm_deg, cfg)
        - delay(wavelength_nm, signal, theta_pm_deg, cfg)
    )
    if not math.isfinite(d):
        raise NumericalError("non-convergent group-delay derivative", d)
    return d


def gvd(
    cfg: CrystalConfig,
    wavelength_nm: float | np.ndarray,
    polarization: Polarization = "o",
    theta_deg: float | np.ndarray = 0.0
):
    """
    Group-velocity dispersion D'' = d²K/dΩ² in fs²/µm.

    Uses d²K/dΩ² = λ³/(2πc²) d²n/dλ².
    """
    _, _, d2n = _index_derivatives(wavelength_nm, polarization, theta_deg, cfg)
    lam_um = np.asarray(wavelength_nm, dtype=float) * 1e-3
    return lam_um ** 3 / (2 * np.pi * C_UM_PER_FS ** 2) * d2n


def gvd_numeric(
    cfg: CrystalConfig,
    wavelength_nm: float,
    polarization: Polarization = "o",
    theta_deg: float = 0.0,
    rel_step: float = SECOND_DERIVATIVE_STEP
) -> float:
    """
    Second-order central difference of K(Ω), validated against the
    halved-step estimate and Richardson-extrapolated.

    Raises
    ------
    NumericalError
        If the two step estimates disagree by more than 1e-3 relative.
        Both estimates are attached to the exception.
    """
    omega = 2 * np.pi * C_NM_PER_FS / wavelength_nm
    k0 = _wavenumber_of_omega(omega, polarization, theta_deg, cfg)

    def second_difference(h: float) -> float:
        k_plus = _wavenumber_of_omega(omega + h, polarization, theta_deg, cfg)
        k_minus = _wavenumber_of_omega(omega - h, polarization, theta_deg, cfg)
        return (k_plus - 2 * k0 + k_minus) / h ** 2

    h = rel_step * omega
    coarse = second_difference(h)
    fine = second_difference(h / 2)
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise NumericalError("non-finite gvd estimate", coarse, fine)
    disagreement = abs(coarse - fine) / max(abs(fine), 1e-300)
    if disagreement > RICHARDSON_TOL:
        raise NumericalError(
            f"gvd step estimates disagree ({coarse:.6g} vs {fine:.6g})",
            coarse, fine
        )
    if disagreement > 1e-5:
        LOGGER.warning("gvd Richardson disagreement %.2e", disagreement)
    return (4 * fine - coarse) / 3


def group_params(
    cfg: CrystalConfig,
    wavelength_nm: float,
    theta_pm_deg: float
) -> GroupParams:
    """
    D (type II, e-ray at `theta_pm_deg`) and D'' (o-ray) together.
    """
    return GroupParams(
        D=group_delay_mismatch(cfg, wavelength_nm, theta_pm_deg),
        Dpp=float(gvd(cfg, wavelength_nm, "o")),
        wavelength_nm=wavelength_nm,
        angle_deg=theta_pm_deg,
    )


def phase_mismatch(
    theta_deg: float,
    pump_nm: float,
    signal_nm: float,
    idler_nm: float,
    pm_type: PMType,
    cfg: CrystalConfig
) -> float:
    """
    Collinear Δk = k_p - k_s - k_i in 1/µm for a negative uniaxial
    crystal: type I is e -> o + o, type II is e -> o + e.
    """
    k_p = wavenumber(pump_nm, "e", theta_deg, cfg)
    k_s = wavenumber(signal_nm, "o", theta_deg, cfg)
    match pm_type:
        case "I":
            k_i = wavenumber(idler_nm, "o", theta_deg, cfg)
        case "II":
            k_i = wavenumber(idler_nm, "e", theta_deg, cfg)
        case _:
            raise ConfigError(f"unknown phase-matching type {pm_type!r}")
    return float(k_p - k_s - k_i)


def solve_collinear_pm_angle(
    pump_nm: float,
    degenerate_nm: float,
    pm_type: PMType,
    cfg: CrystalConfig
) -> float:
    """
    Collinear phase-matching angle for degenerate down-conversion.

    Parameters
    ----------
    pump_nm : float
        Pump wavelength.
    degenerate_nm : float
        Signal = idler wavelength; must equal twice `pump_nm`.
    pm_type : {"I", "II"}
        Phase-matching type.
    cfg : CrystalConfig
        Crystal.

    Returns
    -------
    float
        θ_pm in degrees with |Δk(θ_pm)| < 1e-8 1/µm.
    """
    if not math.isclose(degenerate_nm, 2 * pump_nm, rel_tol=1e-9):
        raise ConfigError(
            f"degenerate wavelength {degenerate_nm} nm is not twice the "
            f"pump wavelength {pump_nm} nm"
        )

    def residual(theta: float) -> float:
        return phase_mismatch(
            theta, pump_nm, degenerate_nm, degenerate_nm, pm_type, cfg
        )

    lo, hi = 1e-9, 90.0 - 1e-9
    f_lo, f_hi = residual(lo), residual(hi)
    LOGGER.debug(
        "Type-%s bracket residuals %.3e, %.3e 1/um", pm_type, f_lo, f_hi
    )
    if f_lo * f_hi > 0:
        raise DomainError(
            f"no phase-matching solution for type-{pm_type} "
            f"{pump_nm} nm -> {degenerate_nm} nm"
        )
    theta = brentq(residual, lo, hi, xtol=1e-13, maxiter=200)
    if abs(residual(theta)) >= PM_RESIDUAL_TOL:
        raise NumericalError(
            f"phase-matching residual {residual(theta):.3e} 1/um too large",
            theta
        )
    return float(theta)
