"""
Monte-Carlo model of the photon-counting chain: pair and excess singles
clicks, detector jitter, a start-stop time-to-amplitude converter with
a multichannel analyzer, and window integration of true and accidental
coincidences.

Detector 1 gives starts, detector 2 gives stops after a fixed
electronic delay. Each pair makes both detectors click with
probability equal to the normalized interference rate; otherwise both
photons leave through one beamsplitter port and a single detector,
picked at random, clicks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.special import erf

from .errors import ConfigError, NumericalError

LOGGER = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"
MAX_EXPECTED_EVENTS = 1e9
SMOOTH_BINS = 5


__all__ = [
    "RNG_ALGORITHM", "CountingConfig", "MCAHistogram", "Coincidences",
    "ExpectedCounts", "VisibilityEstimate", "simulate_mca",
    "correct_pileup", "extract_coincidences", "expected_counts", "expected_visibility",
    "simulate_visibility",
]


@dataclass(frozen=True)
class CountingConfig:
    """
    Rates and electronics of a coincidence measurement.

    Parameters
    ----------
    pair_rate : float
        Pairs per second reaching the beamsplitter with both photons
        inside the apertures and filters.
    singles_excess_rate : float
        Extra uncorrelated clicks per second on each detector.
    window_ns : float, default 3.0
        Coincidence window width.
    accidental_offset_ns : float, default 10.0
        Distance from the true peak to the accidental window.
    duration_s : float, default 1.0
    jitter_sigma_ns : float, default 0.3
        Gaussian timing jitter of each detector.
    rng_seed : int, default 0
    n_shards : int, default 8
        Time-axis shards, each with its own random substream. Part of
        the reproducibility contract together with `rng_seed`.
    stop_delay_ns : float, default 20.0
        Electronic delay on the stop channel.
    tac_range_ns : float, default 50.0
        Each start is stopped by the first stop inside this range.
    bin_width_ns : float, default 0.05
    singles_excess_rate_2 : float, optional
        Excess rate of detector 2 when it differs from detector 1.
    """
    pair_rate: float
    singles_excess_rate: float = 0.0
    window_ns: float = 3.0
    accidental_offset_ns: float = 10.0
    duration_s: float = 1.0
    jitter_sigma_ns: float = 0.3
    rng_seed: int = 0
    n_shards: int = 8
    stop_delay_ns: float = 20.0
    tac_range_ns: float = 50.0
    bin_width_ns: float = 0.05
    singles_excess_rate_2: Optional[float] = None

    def __post_init__(self) -> None:
        if self.pair_rate < 0 or self.singles_excess_rate < 0:
            raise ConfigError("rates must be >= 0")
        if self.singles_excess_rate_2 is not None and self.singles_excess_rate_2 < 0:
            raise ConfigError("rates must be >= 0")
        if not self.window_ns > 0:
            raise ConfigError(f"window width must be > 0, got {self.window_ns}")
        if not abs(self.accidental_offset_ns) > self.window_ns:
            raise ConfigError(
                f"accidental offset {self.accidental_offset_ns} ns must exceed "
                f"the window width {self.window_ns} ns"
            )
        if not self.duration_s > 0:
            raise ConfigError(f"duration must be > 0, got {self.duration_s}")
        if self.jitter_sigma_ns < 0:
            raise ConfigError("jitter must be >= 0")
        if self.n_shards < 1:
            raise ConfigError(f"need at least one shard, got {self.n_shards}")
        if not 0 < self.bin_width_ns <= self.window_ns:
            raise ConfigError("bin width must be within (0, window]")
        if not 0 < self.stop_delay_ns < self.tac_range_ns:
            raise ConfigError("stop delay must lie inside the TAC range")

    @property
    def excess_rates(self) -> tuple[float, float]:
        second = self.singles_excess_rate_2
        return (
            self.singles_excess_rate,
            self.singles_excess_rate if second is None else second,
        )

    def expected_events(self) -> float:
        return (self.pair_rate + sum(self.excess_rates)) * self.duration_s


@dataclass(frozen=True, eq=False)
class MCAHistogram:
    """
    Start-stop time differences.

    Parameters
    ----------
    bin_edges : np.ndarray
        In ns.
    counts : np.ndarray
        Non-negative integer counts per bin.
    total_starts : int
    metadata : dict
        Seed, generator algorithm and shard plan.
    """
    bin_edges: np.ndarray
    counts: np.ndarray
    total_starts: int
    metadata: dict = field(default_factory=dict)

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2

    def __add__(self, other: "MCAHistogram") -> "MCAHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ConfigError("cannot merge histograms with different bins")
        return MCAHistogram(
            self.bin_edges,
            self.counts + other.counts,
            self.total_starts + other.total_starts,
            self.metadata,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin_start_ns": self.bin_edges[:-1],
            "bin_end_ns": self.bin_edges[1:],
            "counts": self.counts,
        })


class Coincidences(NamedTuple):
    true_counts: float
    accidental_counts: float
    peak_ns: float

    @property
    def net(self) -> float:
        return self.true_counts - self.accidental_counts


class ExpectedCounts(NamedTuple):
    pairs: float
    accidentals: float
    singles_1: float
    singles_2: float

    @property
    def window(self) -> float:
        """
        Mean counts in the peak window.
        """
        return self.pairs + self.accidentals


class VisibilityEstimate(NamedTuple):
    raw: float
    corrected: float
    dip: Optional[Coincidences] = None
    peak: Optional[Coincidences] = None


def _bin_edges(cfg: CountingConfig) -> np.ndarray:
    n_bins = int(round(cfg.tac_range_ns / cfg.bin_width_ns))
    return np.arange(n_bins + 1) * cfg.bin_width_ns


def _poisson_times(rng: np.random.Generator, rate: float, span: float) -> np.ndarray:
    return rng.uniform(0.0, span, rng.poisson(rate * span))


def _simulate_shard(
    cfg: CountingConfig,
    interference_rate: float,
    seed: np.random.SeedSequence,
    edges: np.ndarray
) -> tuple[np.ndarray, int]:
    rng = np.random.Generator(np.random.PCG64(seed))
    # times in ns
    span = cfg.duration_s / cfg.n_shards * 1e9
    excess_1, excess_2 = cfg.excess_rates

    pairs = _poisson_times(rng, cfg.pair_rate * 1e-9, span)
    together = rng.random(pairs.size) < interference_rate
    to_first = rng.random(pairs.size) < 0.5
    first = np.concatenate([
        pairs[together] + rng.normal(0.0, cfg.jitter_sigma_ns, together.sum()),
        pairs[~together & to_first],
        _poisson_times(rng, excess_1 * 1e-9, span),
    ])
    second = np.concatenate([
        pairs[together] + rng.normal(0.0, cfg.jitter_sigma_ns, together.sum()),
        pairs[~together & ~to_first],
        _poisson_times(rng, excess_2 * 1e-9, span),
    ])
    starts = np.sort(first)
    stops = np.sort(second + cfg.stop_delay_ns)

    # single-stop TAC: only the first stop after a start is converted
    lo = np.searchsorted(stops, starts, side="left")
    hi = np.searchsorted(stops, starts + cfg.tac_range_ns, side="left")
    found = lo < hi
    differences = stops[lo[found]] - starts[found]
    counts, _ = np.histogram(differences, bins=edges)
    return counts.astype(np.int64), int(starts.size)


def simulate_mca(
    cfg: CountingConfig,
    interference_rate: float,
    workers: int = 1
) -> MCAHistogram:
    """
    Simulate the TAC/MCA histogram at one interferometer delay.

    Parameters
    ----------
    cfg : CountingConfig
    interference_rate : float
        Normalized coincidence rate in [0, 1] from an interference
        pattern.
    workers : int, default 1
        Threads; the histogram does not depend on it.

    Returns
    -------
    MCAHistogram

    Raises
    ------
    ConfigError
        If the rate is outside [0, 1] or more than 1e9 events are
        expected.
    """
    if not 0 <= interference_rate <= 1:
        raise ConfigError(f"interference rate must be within [0, 1], got {interference_rate}")
    expected = cfg.expected_events()
    if expected > MAX_EXPECTED_EVENTS:
        raise ConfigError(
            f"{expected:.3g} expected events exceed the limit of {MAX_EXPECTED_EVENTS:.0e}"
        )
    edges = _bin_edges(cfg)
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.n_shards)
    LOGGER.debug(
        "Simulating %.3g events over %d shards (seed %d)",
        expected, cfg.n_shards, cfg.rng_seed
    )

    def run(seed: np.random.SeedSequence) -> tuple[np.ndarray, int]:
        return _simulate_shard(cfg, interference_rate, seed, edges)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            shards = list(executor.map(run, seeds))
    else:
        shards = [run(seed) for seed in seeds]

    counts = np.zeros(edges.size - 1, dtype=np.int64)
    total_starts = 0
    for shard_counts, shard_starts in shards:
        counts += shard_counts
        total_starts += shard_starts
    return MCAHistogram(
        bin_edges=edges,
        counts=counts,
        total_starts=total_starts,
        metadata={
            "rng_algorithm": RNG_ALGORITHM,
            "rng_seed": cfg.rng_seed,
            "n_shards": cfg.n_shards,
            "interference_rate": interference_rate,
            "stop_delay_ns": cfg.stop_delay_ns,
        },
    )


def correct_pileup(h: MCAHistogram) -> np.ndarray:
    """
    Mean stops per bin with the first-stop pile-up of the single-stop
    converter undone (Coates correction).

    A start still waiting when bin i opens is stopped there with
    probability p = counts[i] / waiting, so -ln(1 - p) stops per start
    fell into the bin on average.

    Raises
    ------
    NumericalError
        If a bin stopped every start that was still waiting.
    """
    converted_before = np.concatenate(([0], np.cumsum(h.counts)[:-1]))
    waiting = h.total_starts - converted_before
    if np.any((h.counts > 0) & (h.counts >= waiting)):
        raise NumericalError("pile-up correction undefined: a bin stopped every waiting start")
    probability = np.divide(
        h.counts, waiting, out=np.zeros(h.counts.size), where=waiting > 0
    )
    return -h.total_starts * np.log1p(-probability)


def extract_coincidences(
    h: MCAHistogram,
    window_ns: float,
    accidental_offset_ns: float,
    smooth_bins: int = SMOOTH_BINS,
    pileup_correction: bool = False
) -> Coincidences:
    """
    Integrate the true-peak window and an offset accidental window.

    The peak window is centred on the stop delay that
    :func:`simulate_mca` records in the metadata. Histograms without it
    fall back to the maximum bin of the histogram smoothed with a
    `smooth_bins` boxcar. Both windows span the same whole number of
    bins.

    Parameters
    ----------
    h : MCAHistogram
    window_ns : float
    accidental_offset_ns : float
        Signed distance from the peak window to the accidental window.
    smooth_bins : int, default 5
    pileup_correction : bool, default False
        Sum :func:`correct_pileup` instead of the raw counts.

    Raises
    ------
    ConfigError
        If the windows overlap or either leaves the histogram.
    """
    if not window_ns > 0:
        raise ConfigError(f"window width must be > 0, got {window_ns}")
    if abs(accidental_offset_ns) < window_ns:
        raise ConfigError(
            f"accidental window at {accidental_offset_ns} ns overlaps the "
            f"{window_ns} ns peak window"
        )
    width = h.bin_width
    n_window = max(1, int(round(window_ns / width)))
    shift = int(round(accidental_offset_ns / width))

    delay = h.metadata.get("stop_delay_ns")
    if delay is None:
        kernel = np.ones(smooth_bins) / smooth_bins
        center = int(np.argmax(np.convolve(h.counts, kernel, mode="same")))
    else:
        center = int(np.searchsorted(h.bin_edges, delay, side="right")) - 1
    start = center - n_window // 2
    accidental_start = start + shift
    n_bins = h.counts.size
    for first in (start, accidental_start):
        if first < 0 or first + n_window > n_bins:
            raise ConfigError("coincidence window extends beyond the histogram range")

    counts = correct_pileup(h) if pileup_correction else h.counts
    return Coincidences(
        true_counts=float(counts[start:start + n_window].sum()),
        accidental_counts=float(counts[accidental_start:accidental_start + n_window].sum()),
        peak_ns=float(h.centers[center]),
    )


def expected_counts(cfg: CountingConfig, interference_rate: float) -> ExpectedCounts:
    """
    Mean counts of the same detection model without sampling.

    Converter pile-up is left out, so these are the means that
    ``extract_coincidences(..., pileup_correction=True)`` estimates.
    """
    excess_1, excess_2 = cfg.excess_rates
    from_pairs = cfg.pair_rate * (interference_rate + (1 - interference_rate) / 2)
    singles_1 = from_pairs + excess_1
    singles_2 = from_pairs + excess_2
    spread = math.sqrt(2) * cfg.jitter_sigma_ns
    inside = 1.0 if spread == 0 else float(erf(cfg.window_ns / 2 / (spread * math.sqrt(2))))
    return ExpectedCounts(
        pairs=cfg.pair_rate * interference_rate * cfg.duration_s * inside,
        accidentals=singles_1 * singles_2 * cfg.window_ns * 1e-9 * cfg.duration_s,
        singles_1=singles_1 * cfg.duration_s,
        singles_2=singles_2 * cfg.duration_s,
    )


def _contrast(high: float, low: float) -> float:
    return (high - low) / (high + low) if high + low > 0 else 0.0


def expected_visibility(
    cfg: CountingConfig,
    dip_rate: float,
    peak_rate: float
) -> VisibilityEstimate:
    """
    Raw and accidental-corrected visibility from mean counts.
    """
    dip = expected_counts(cfg, dip_rate)
    peak = expected_counts(cfg, peak_rate)
    return VisibilityEstimate(
        raw=_contrast(peak.window, dip.window),
        corrected=_contrast(peak.pairs, dip.pairs),
    )


def simulate_visibility(
    cfg: CountingConfig,
    dip_rate: float,
    peak_rate: float,
    workers: int = 1
) -> VisibilityEstimate:
    """
    Simulate the dip and peak settings and compare raw with
    accidental-subtracted visibility.
    """
    dip_seed, peak_seed = (
        int(s) for s in np.random.SeedSequence(cfg.rng_seed).generate_state(2)
    )
    dip = extract_coincidences(
        simulate_mca(replace(cfg, rng_seed=dip_seed), dip_rate, workers),
        cfg.window_ns, cfg.accidental_offset_ns, pileup_correction=True,
    )
    peak = extract_coincidences(
        simulate_mca(replace(cfg, rng_seed=peak_seed), peak_rate, workers),
        cfg.window_ns, cfg.accidental_offset_ns, pileup_correction=True,
    )
    LOGGER.info(
        "Dip %.0f (%.0f accidental), peak %.0f (%.0f accidental)",
        dip.true_counts, dip.accidental_counts,
        peak.true_counts, peak.accidental_counts
    )
    return VisibilityEstimate(
        raw=_contrast(peak.true_counts, dip.true_counts),
        corrected=_contrast(peak.net, dip.net),
        dip=dip,
        peak=peak,
    )
