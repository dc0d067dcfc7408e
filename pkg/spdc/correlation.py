"""
First- and second-order correlation functions of a biphoton amplitude.

G¹(τ) is the Fourier transform of the power spectrum |T(ν)|², and
G²(τ) the squared modulus of the Fourier transform of T(ν) itself, so
spectral phase drops out of the first and survives in the second.
Integrals use the trapezoidal rule on the detuning grid.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
import pandas as pd

from .errors import ConfigError, DomainError, NumericalError
from .spectral_model import SpectralAmplitude, half_max_crossings

LOGGER = logging.getLogger(__name__)

TraceKind = Literal["g1_envelope", "g2"]
Method = Literal["direct", "fft"]

DEFAULT_CHUNK = 64


__all__ = [
    "TraceKind", "Method", "CorrelationTrace", "Width", "normalization",
    "fourier_integral", "first_order_correlation", "g1_envelope", "g2",
    "fwhm",
]


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """
    A unit-peak correlation trace.

    Parameters
    ----------
    tau : np.ndarray
        Delays in fs.
    values : np.ndarray
        Values in [0, 1].
    kind : {"g1_envelope", "g2"}
    source : str
        Description of the amplitude it was computed from.
    norm : float
        Constant the raw trace was divided by.
    """
    tau: np.ndarray
    values: np.ndarray
    kind: TraceKind
    source: str = ""
    norm: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        tau = np.array(self.tau, dtype=float)
        values = np.array(self.values, dtype=float)
        if tau.shape != values.shape or tau.ndim != 1:
            raise ConfigError("trace delays and values must be matching 1-D arrays")
        tau.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau_fs": self.tau, "value": self.values})

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "source": self.source,
            "norm": self.norm,
            **self.metadata,
        }


class Width(NamedTuple):
    value: float
    multimodal: bool

    def __float__(self) -> float:
        return self.value


def normalization(T: SpectralAmplitude) -> float:
    """
    ∫|T(ν)|² dν by the trapezoidal rule.
    """
    return float(np.sum(T.grid.weights * T.power))


def _check_delays(T: SpectralAmplitude, tau: np.ndarray) -> None:
    if tau.ndim != 1 or tau.size == 0:
        raise ConfigError("delays must be a non-empty 1-D array")
    if not np.all(np.isfinite(tau)):
        raise ConfigError("delays must be finite")
    limit = T.grid.max_delay
    worst = np.max(np.abs(tau))
    if worst > limit:
        raise DomainError(
            f"delay {worst:.6g} fs exceeds resolvable range "
            f"{limit:.6g} fs of the grid"
        )


def _direct(
    nu: np.ndarray,
    weighted: np.ndarray,
    tau: np.ndarray,
    chunk: int,
    workers: int
) -> np.ndarray:
    # Each delay is an independent sum in fixed order over the grid
    def block(start: int) -> np.ndarray:
        t = tau[start:start + chunk]
        return np.sum(np.exp(-1j * np.outer(t, nu)) * weighted, axis=1)

    starts = range(0, tau.size, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return np.concatenate(parts)


def _fft(T: SpectralAmplitude, weighted: np.ndarray, tau: np.ndarray) -> np.ndarray:
    grid = T.grid
    conjugate = grid.conjugate_delays()
    if tau.min() < conjugate[0] or tau.max() > conjugate[-1]:
        raise DomainError(
            f"delays must lie within [{conjugate[0]:.6g}, {conjugate[-1]:.6g}] "
            "fs for the fft method"
        )
    spectrum = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(weighted)))
    return (
        np.interp(tau, conjugate, spectrum.real)
        + 1j * np.interp(tau, conjugate, spectrum.imag)
    )


def fourier_integral(
    T: SpectralAmplitude,
    f: np.ndarray,
    tau: np.ndarray,
    *,
    method: Method = "direct",
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1
) -> np.ndarray:
    """
    ∫ f(ν) e^{-iντ} dν on the grid of `T` for every delay.

    Parameters
    ----------
    T : SpectralAmplitude
        Supplies the grid.
    f : np.ndarray
        Integrand sampled on the grid.
    tau : np.ndarray
        Delays in fs; must stay within π/dν.
    method : {"direct", "fft"}, default "direct"
        Direct oscillatory sum for arbitrary delays, or an FFT onto the
        conjugate delay grid followed by linear interpolation.
    chunk : int, default 64
        Delays per block in the direct sum.
    workers : int, default 1
        Threads for the direct sum. The result does not depend on it.

    Returns
    -------
    np.ndarray
        Complex integrals.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_delays(T, tau)
    weighted = T.grid.weights * np.asarray(f)
    match method:
        case "direct":
            return _direct(T.nu, weighted, tau, chunk, max(1, workers))
        case "fft":
            return _fft(T, weighted, tau)
        case _:
            raise ConfigError(f"unknown correlation method {method!r}")


def first_order_correlation(
    T: SpectralAmplitude,
    tau: np.ndarray,
    **options
) -> np.ndarray:
    """
    Unnormalized complex G¹(τ) = ∫|T(ν)|² e^{-iντ} dν, carrier excluded.
    """
    return fourier_integral(T, T.power, tau, **options)


def g1_envelope(
    T: SpectralAmplitude,
    tau: np.ndarray,
    **options
) -> CorrelationTrace:
    """
    |G¹(τ)| / ∫|T|² dν.

    Keyword options are passed to :func:`fourier_integral`.
    """
    norm = normalization(T)
    values = np.abs(first_order_correlation(T, tau, **options)) / norm
    return CorrelationTrace(
        tau=np.atleast_1d(tau),
        values=np.clip(values, 0.0, 1.0),
        kind="g1_envelope",
        source=T.description,
        norm=norm,
    )


def g2(
    T: SpectralAmplitude,
    tau: np.ndarray,
    **options
) -> CorrelationTrace:
    """
    |∫T(ν) e^{-iντ} dν|², normalized to unit peak over `tau`.
    """
    values = np.abs(fourier_integral(T, T.values, tau, **options)) ** 2
    peak = float(values.max())
    if peak == 0:
        raise NumericalError("second-order correlation vanishes on all delays")
    return CorrelationTrace(
        tau=np.atleast_1d(tau),
        values=values / peak,
        kind="g2",
        source=T.description,
        norm=peak,
    )


def fwhm(trace: CorrelationTrace) -> Width:
    """
    Full width at half maximum of a trace.

    Half-height crossings are linearly interpolated; when the trace
    crosses half height more than twice the outermost crossings are used
    and the result is flagged multimodal.

    Raises
    ------
    NumericalError
        If the peak or the half-height region reaches the array
        boundary.
    """
    x, y = trace.tau, trace.values
    peak = int(np.argmax(y))
    if peak in (0, y.size - 1):
        raise NumericalError("unresolved peak at the edge of the delay range")
    try:
        lo, hi, multimodal = half_max_crossings(x, y)
    except ValueError as e:
        raise NumericalError(f"unresolved peak: {e}") from e
    if multimodal:
        LOGGER.warning("Trace %r crosses half height more than twice", trace.kind)
    return Width(hi - lo, multimodal)
