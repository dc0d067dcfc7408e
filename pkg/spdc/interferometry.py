"""
Michelson single-count fringes and polarization-analyzed two-photon
coincidence traces.

All rates are normalized so that the coincidence baseline far from
zero delay is 1/2. Counts per second only appear in
:mod:`spdc.montecarlo_detection`.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, get_args

import numpy as np
import pandas as pd

from .correlation import (
    CorrelationTrace, fourier_integral, fwhm, g1_envelope, normalization
)
from .errors import ConfigError, DomainError, NumericalError
from .spectral_model import SpectralAmplitude

LOGGER = logging.getLogger(__name__)

PatternMode = Literal["michelson", "hom_closed", "hom_general", "hom_brute_force"]
Sign = Literal["plus", "minus"]

FRINGE_SAMPLES_PER_PERIOD = 10
SUBTRACTION_TOL = 1e-9


__all__ = [
    "PatternMode", "Sign", "InterferencePattern", "analyzer_weights",
    "michelson", "hom_closed", "exchange_overlap", "hom_general",
    "hom_brute_force",
    "visibility", "fringe_visibility", "baseline", "scale_visibility",
    "subtract_accidentals", "add_accidentals", "envelope_width",
]


@dataclass(frozen=True, eq=False)
class InterferencePattern:
    """
    Normalized count rate against delay.

    Parameters
    ----------
    tau : np.ndarray
        Delays in fs.
    rate : np.ndarray
        Normalized rate; the coincidence baseline is 1/2.
    mode : {"michelson", "hom_closed", "hom_general", "hom_brute_force"}
    theta1, theta2 : float
        Analyzer angles in degrees.
    sign : {"plus", "minus"}, optional
        Interference sign of a closed-form trace.
    carrier_omega : float, optional
        Ω in rad/fs; Michelson only.
    envelope : np.ndarray, optional
        g¹(τ) for Michelson fringes, g¹(2τ) for closed-form traces.
    source : str
    """
    tau: np.ndarray
    rate: np.ndarray
    mode: PatternMode
    theta1: float = 45.0
    theta2: float = 45.0
    sign: Optional[Sign] = None
    carrier_omega: Optional[float] = None
    envelope: Optional[np.ndarray] = None
    source: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        tau = np.array(self.tau, dtype=float)
        rate = np.array(self.rate, dtype=float)
        if tau.shape != rate.shape or tau.ndim != 1:
            raise ConfigError("pattern delays and rates must be matching 1-D arrays")
        if self.mode not in get_args(PatternMode):
            raise ConfigError(f"unknown pattern mode {self.mode!r}")
        tau.setflags(write=False)
        rate.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "rate", rate)

    def at(self, delay: float) -> float:
        """
        Rate at `delay`, linearly interpolated.
        """
        return float(np.interp(delay, self.tau, self.rate))

    def with_rate(self, rate: np.ndarray, **changes) -> "InterferencePattern":
        return replace(self, rate=rate, **changes)

    def envelope_trace(self) -> CorrelationTrace:
        """
        Interference envelope as a trace for :func:`spdc.correlation.fwhm`.

        Uses the stored analytic envelope when there is one, otherwise
        |rate - baseline|.
        """
        if self.envelope is not None:
            values = self.envelope
        else:
            values = np.abs(self.rate - baseline(self))
        return CorrelationTrace(self.tau, values, "g1_envelope", self.source)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"tau_fs": self.tau, "rate": self.rate})
        if self.envelope is not None:
            frame["envelope"] = self.envelope
        return frame

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "theta1_deg": self.theta1,
            "theta2_deg": self.theta2,
            "sign": self.sign,
            "carrier_omega": self.carrier_omega,
            "source": self.source,
            **self.metadata,
        }


def analyzer_weights(theta1: float, theta2: float) -> tuple[float, float]:
    """
    Projection weights of the two two-photon paths.

    Returns
    -------
    tuple of (float, float)
        a = sin θ₂ cos θ₁ for signal at detector 2 and idler at
        detector 1, b = cos θ₂ sin θ₁ for the exchanged path.
    """
    t1, t2 = math.radians(theta1), math.radians(theta2)
    return math.sin(t2) * math.cos(t1), math.cos(t2) * math.sin(t1)


def _delays(tau) -> np.ndarray:
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.ndim != 1 or tau.size == 0:
        raise ConfigError("delays must be a non-empty 1-D array")
    return tau


def michelson(T: SpectralAmplitude, tau, **options) -> InterferencePattern:
    """
    Single-count fringes ½(1 + g¹(τ)cos(Ωτ)).

    Raises
    ------
    DomainError
        If the delay step exceeds a tenth of the carrier period.
    """
    tau = _delays(tau)
    period = 2 * np.pi / T.center_omega
    if tau.size > 1:
        step = float(np.max(np.diff(np.sort(tau))))
        if step > period / FRINGE_SAMPLES_PER_PERIOD:
            raise DomainError(
                f"delay step {step:.4g} fs aliases the {period:.4g} fs "
                f"carrier; use at most {period / FRINGE_SAMPLES_PER_PERIOD:.4g} fs"
            )
    envelope = g1_envelope(T, tau, **options).values
    rate = 0.5 * (1 + envelope * np.cos(T.center_omega * tau))
    return InterferencePattern(
        tau=tau,
        rate=rate,
        mode="michelson",
        carrier_omega=T.center_omega,
        envelope=envelope,
        source=T.description,
    )


def hom_closed(
    T: SpectralAmplitude,
    tau,
    sign: Sign = "minus",
    **options
) -> InterferencePattern:
    """
    Coincidence rate ½(1 ± g¹(2τ)).

    The minus sign belongs to parallel analyzers at 45° and gives a dip,
    the plus sign to crossed analyzers and gives a peak.
    """
    tau = _delays(tau)
    match sign:
        case "minus":
            s, theta2 = -1.0, 45.0
        case "plus":
            s, theta2 = 1.0, -45.0
        case _:
            raise ConfigError(f"sign must be 'plus' or 'minus', got {sign!r}")
    envelope = g1_envelope(T, 2 * tau, **options).values
    return InterferencePattern(
        tau=tau,
        rate=0.5 * (1 + s * envelope),
        mode="hom_closed",
        theta1=45.0,
        theta2=theta2,
        sign=sign,
        envelope=envelope,
        source=T.description,
    )


def exchange_overlap(
    T: SpectralAmplitude,
    tau,
    *,
    absolute_delay: bool = False,
    **options
) -> np.ndarray:
    """
    C(τ) = ∫ T(ν)T*(-ν) e^{2iντ} dν / ∫|T|² dν.

    Overlap of the two-photon amplitude with its signal-idler exchanged
    copy. Unless `absolute_delay` is set, τ is counted from the group
    delay carried by the amplitude's linear phase.
    """
    tau = _delays(tau)
    shift = 0.0 if absolute_delay else T.group_delay_fs
    # grid is symmetric, so reversing samples maps ν to -ν
    product = T.values * np.conj(T.values[::-1])
    return fourier_integral(T, product, -2 * (tau + shift), **options) / normalization(T)


def hom_general(
    T: SpectralAmplitude,
    tau,
    theta1: float,
    theta2: float,
    *,
    absolute_delay: bool = False,
    **options
) -> InterferencePattern:
    """
    Coincidence rate behind a 50/50 beamsplitter and two polarization
    analyzers at arbitrary angles.

    With a = sin θ₂ cos θ₁ and b = cos θ₂ sin θ₁ the double time
    integral of the two-photon amplitude reduces to

        R_c(τ) = a² + b² - 2ab Re C(τ)

    where C is :func:`exchange_overlap`. Parallel analyzers at 45° give
    ½(1 - Re C), crossed ones ½(1 + Re C). When C is real and
    non-negative this matches :func:`hom_closed`.

    Parameters
    ----------
    T : SpectralAmplitude
    tau : array_like
        Delays in fs.
    theta1, theta2 : float
        Analyzer angles in degrees.
    absolute_delay : bool, default False
        Measure τ from the arm-length balance instead of from the
        amplitude's group delay. For type II the dip then sits at D·L/2.

    Returns
    -------
    InterferencePattern
    """
    tau = _delays(tau)
    a, b = analyzer_weights(theta1, theta2)
    if a * b == 0:
        overlap = np.zeros(tau.size)
    else:
        overlap = exchange_overlap(
            T, tau, absolute_delay=absolute_delay, **options
        ).real
    rate = a ** 2 + b ** 2 - 2 * a * b * overlap
    return InterferencePattern(
        tau=tau,
        rate=np.clip(rate, 0.0, 1.0),
        mode="hom_general",
        theta1=theta1,
        theta2=theta2,
        source=T.description,
        metadata={"absolute_delay": absolute_delay},
    )


def hom_brute_force(
    T: SpectralAmplitude,
    tau,
    theta1: float,
    theta2: float,
    *,
    span_fs: float,
    steps: int = 801,
    t1_steps: int = 5,
    absolute_delay: bool = False
) -> InterferencePattern:
    """
    Coincidence rate from direct quadrature over detection times.

    The two-photon amplitude at detection times t₁, t₂ is

        A(t₁, t₂) = a f(t₂ - t₁ - τ) - b f(t₁ - t₂ - τ)

    with f(x) = ∫ T(ν) e^{-iνx} dν. |A|² is summed over t₁ and over
    t₂ - t₁ within ±`span_fs`, then divided by the same sum of |f|².
    Slow; kept as an independent check of :func:`hom_general`.
    """
    tau = _delays(tau)
    if steps < 3 or t1_steps < 1 or not span_fs > 0:
        raise ConfigError("brute-force grid needs steps >= 3, t1_steps >= 1, span > 0")
    a, b = analyzer_weights(theta1, theta2)
    shift = 0.0 if absolute_delay else T.group_delay_fs
    effective = tau + shift

    rel = np.linspace(-span_fs, span_fs, steps)
    du = rel[1] - rel[0]
    reach = span_fs + np.max(np.abs(effective))
    x = np.arange(-reach - du, reach + 2 * du, du)
    f_x = fourier_integral(T, T.values, x)

    def f(at: np.ndarray) -> np.ndarray:
        return np.interp(at, x, f_x.real) + 1j * np.interp(at, x, f_x.imag)

    t1 = np.linspace(-span_fs, span_fs, t1_steps)
    t2 = t1[:, None] + rel[None, :]
    difference = t2 - t1[:, None]
    reference = np.sum(np.abs(f(difference)) ** 2)

    rate = np.empty(tau.size)
    for j, t in enumerate(effective):
        amplitude = a * f(difference - t) - b * f(-difference - t)
        rate[j] = np.sum(np.abs(amplitude) ** 2) / reference
    return InterferencePattern(
        tau=tau,
        rate=rate,
        mode="hom_brute_force",
        theta1=theta1,
        theta2=theta2,
        source=T.description,
        metadata={"span_fs": span_fs, "steps": steps},
    )


def visibility(pattern: InterferencePattern, paired: InterferencePattern) -> float:
    """
    V = (max - min)/(max + min) from the two traces at τ = 0.

    The larger of the two zero-delay values is taken as the peak and
    the smaller as the dip.
    """
    if not np.array_equal(pattern.tau, paired.tau):
        raise ConfigError("visibility needs traces on the same delay grid")
    values = pattern.at(0.0), paired.at(0.0)
    high, low = max(values), min(values)
    if high + low == 0:
        raise NumericalError("visibility undefined: max + min = 0")
    return (high - low) / (high + low)


def fringe_visibility(pattern: InterferencePattern) -> float:
    """
    (max - min)/(max + min) of a single trace, e.g. Michelson fringes
    around zero delay.
    """
    high, low = float(pattern.rate.max()), float(pattern.rate.min())
    if high + low == 0:
        raise NumericalError("visibility undefined: max + min = 0")
    return (high - low) / (high + low)


def baseline(pattern: InterferencePattern, fraction: float = 0.1) -> float:
    """
    Mean rate over the outermost `fraction` of the delay range.
    """
    lo, hi = pattern.tau.min(), pattern.tau.max()
    edge = fraction * (hi - lo) / 2
    wings = (pattern.tau <= lo + edge) | (pattern.tau >= hi - edge)
    return float(pattern.rate[wings].mean())


def scale_visibility(pattern: InterferencePattern, factor: float) -> InterferencePattern:
    """
    Shrink the interference term about the 1/2 baseline by `factor`.

    Stands in for mode mismatch and other imperfections that are not
    modeled.
    """
    if not 0 <= factor <= 1:
        raise ConfigError(f"visibility factor must be within [0, 1], got {factor}")
    return pattern.with_rate(
        0.5 + factor * (pattern.rate - 0.5),
        metadata={**pattern.metadata, "visibility_factor": factor},
    )


def subtract_accidentals(
    pattern: InterferencePattern,
    accidental_level: float
) -> InterferencePattern:
    """
    Remove a flat accidental-coincidence level and restore the 1/2
    baseline.

    Parameters
    ----------
    pattern : InterferencePattern
    accidental_level : float
        Flat background in normalized rate units.

    Returns
    -------
    InterferencePattern
        Rate (rate - level)/(1 - 2·level).

    Raises
    ------
    DomainError
        If the level reaches the baseline or exceeds the trace minimum.
    """
    if accidental_level < 0:
        raise DomainError(f"accidental level must be >= 0, got {accidental_level}")
    if accidental_level >= 0.5:
        raise DomainError(
            f"accidental level {accidental_level} reaches the 1/2 baseline"
        )
    if accidental_level > pattern.rate.min() + SUBTRACTION_TOL:
        raise DomainError(
            f"accidental level {accidental_level} exceeds the trace minimum "
            f"{pattern.rate.min():.6g}"
        )
    if accidental_level == 0:
        return pattern
    rate = (pattern.rate - accidental_level) / (1 - 2 * accidental_level)
    LOGGER.debug("Subtracted accidental level %.4g", accidental_level)
    return pattern.with_rate(
        np.clip(rate, 0.0, None),
        metadata={**pattern.metadata, "accidentals_subtracted": accidental_level},
    )


def add_accidentals(
    pattern: InterferencePattern,
    accidental_level: float
) -> InterferencePattern:
    """
    Inverse of :func:`subtract_accidentals`.
    """
    if not 0 <= accidental_level < 0.5:
        raise DomainError(
            f"accidental level must be within [0, 0.5), got {accidental_level}"
        )
    if accidental_level == 0:
        return pattern
    return pattern.with_rate(
        pattern.rate * (1 - 2 * accidental_level) + accidental_level,
        metadata={**pattern.metadata, "accidentals_added": accidental_level},
    )


def envelope_width(pattern: InterferencePattern) -> float:
    """
    FWHM of the interference envelope in fs.
    """
    return fwhm(pattern.envelope_trace()).value
