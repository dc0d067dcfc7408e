"""
Run configuration: an INI (or JSON) file layered over the built-in
"paper" preset.
"""
import ast
import json
import logging
import math
import os
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Literal, Optional, get_args

import numpy as np

from .crystal_optics import CrystalConfig, PMType, load_sellmeier
from .errors import ConfigError
from .io import SCHEMA_VERSION, atomic_write
from .montecarlo_detection import CountingConfig
from .spectral_model import FilterSpec
from .tuning_curve import ApertureGeometry

LOGGER = logging.getLogger(__name__)

Preset = Literal["paper"]
OutputFormat = Literal["csv", "json", "svg"]
CorrelationMethod = Literal["direct", "fft"]

CONFIG_DEFAULT = {
    "Crystal": {
        "name": "bbo",
        "length_um": "2000.0",
        "cut_angle_deg": "45.0",
        "data_dir": "None",
    },
    "Pump": {
        "wavelength_nm": "351.1",
        "pm_type": "II",
    },
    "Grid": {
        "half_count": "8192",
        "zeros_type2": "64",
        "zeros_type1": "8",
        "method": "direct",
    },
    "Filters": {
        "fwhm_nm": "None",  # None for no filters, or signal, idler
        "center_nm": "702.2",
        "shape": "gaussian",
        "basis": "field",
    },
    "Apertures": {
        "emission_angle_deg": "3.0",
        "distance_mm": "2800.0",
        "diameter_mm": "3.0",
        "michelson_distance_mm": "2000.0",
    },
    "Delay": {
        "tau_min_fs": "-600.0",
        "tau_max_fs": "600.0",
        "tau_step_fs": "1.0",
        "michelson_step_fs": "0.2",
    },
    "Counting": {
        "pair_rate": "1e5",
        "singles_excess_rate": "0.0",
        "window_ns": "3.0",
        "accidental_offset_ns": "10.0",
        "duration_s": "1.0",
        "jitter_sigma_ns": "0.3",
        "seed": "0",
        "n_shards": "8",
        "interference_rate": "0.5",
        "true_visibility": "0.86",
        "raw_visibility": "0.32",
    },
    "Output": {
        "directory": "out",
        "format": "csv",
    },
}
PRESETS: dict[str, dict[str, dict[str, str]]] = {"paper": CONFIG_DEFAULT}


__all__ = [
    "CONFIG_DEFAULT", "Preset", "OutputFormat", "RunConfig",
    "load_run_config", "write_default_config",
]


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a CLI command needs.
    """
    crystal: CrystalConfig
    pump_nm: float
    pm_type: PMType
    filters: tuple[FilterSpec, FilterSpec]
    apertures: tuple[ApertureGeometry, ApertureGeometry]
    emission_angle_deg: float
    michelson_distance_mm: float
    half_count: int
    zeros_type2: float
    zeros_type1: float
    method: CorrelationMethod
    tau_min_fs: float
    tau_max_fs: float
    tau_step_fs: float
    michelson_step_fs: float
    counting: CountingConfig
    interference_rate: float
    true_visibility: float
    raw_visibility: float
    output_dir: Path
    output_format: OutputFormat
    source: Optional[Path] = None
    schema_version: str = SCHEMA_VERSION
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.tau_max_fs > self.tau_min_fs:
            raise ConfigError("[Delay] tau_max_fs must exceed tau_min_fs")
        if not self.tau_step_fs > 0 or not self.michelson_step_fs > 0:
            raise ConfigError("[Delay] steps must be > 0")
        if not 0 <= self.interference_rate <= 1:
            raise ConfigError("[Counting] interference_rate must be within [0, 1]")
        if not 0 < self.raw_visibility < self.true_visibility <= 1:
            raise ConfigError(
                "[Counting] need 0 < raw_visibility < true_visibility <= 1"
            )
        if self.method not in get_args(CorrelationMethod):
            raise ConfigError(f"[Grid] method must be one of {get_args(CorrelationMethod)}")
        if self.output_format not in get_args(OutputFormat):
            raise ConfigError(f"[Output] format must be one of {get_args(OutputFormat)}")

    @property
    def degenerate_nm(self) -> float:
        return 2 * self.pump_nm

    @property
    def filtered(self) -> bool:
        return not all(f.is_flat for f in self.filters)

    def taus(self, step: Optional[float] = None) -> np.ndarray:
        """
        Delay grid from tau_min_fs to tau_max_fs inclusive.
        """
        step = self.tau_step_fs if step is None else step
        count = int(math.floor((self.tau_max_fs - self.tau_min_fs) / step + 1e-9)) + 1
        return self.tau_min_fs + step * np.arange(count)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, counting=replace(self.counting, rng_seed=seed))

    def with_filters(self, fwhm_nm: float) -> "RunConfig":
        spec = replace(self.filters[0], fwhm_nm=fwhm_nm)
        return replace(self, filters=(spec, replace(self.filters[1], fwhm_nm=fwhm_nm)))


def _parse(value: str) -> Any:
    # Python literals where possible, bare words stay strings
    try:
        return ast.literal_eval(value.strip())
    except (ValueError, SyntaxError):
        return value.strip()


def _read_json(path: Path) -> dict:
    with open(path) as f:
        document = json.load(f)
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: expected an object of sections")
    return document


def _read(path: Optional[str | os.PathLike], preset: str) -> ConfigParser:
    document = None
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        if path.suffix.lower() == ".json":
            try:
                document = _read_json(path)
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise ConfigError(f"malformed config file {path}: {e}") from e
            # a top-level "defaults" key names the preset the file builds on
            preset = document.pop("defaults", preset)

    if not isinstance(preset, str) or preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}, choose from {sorted(PRESETS)}")
    config = ConfigParser(inline_comment_prefixes=("#", ";"))
    config.read_dict(PRESETS[preset])
    if path is None:
        return config

    try:
        if document is not None:
            if not all(isinstance(v, dict) for v in document.values()):
                raise ConfigError(f"{path}: expected an object of sections")
            config.read_dict({
                section: {key: repr(value) for key, value in values.items()}
                for section, values in document.items()
            })
        else:
            config.read(path)
    except (ConfigParserError, UnicodeDecodeError) as e:
        raise ConfigError(f"malformed config file {path}: {e}") from e

    for section in config.sections():
        if section not in CONFIG_DEFAULT:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in config[section]:
            if key not in CONFIG_DEFAULT[section]:
                raise ConfigError(f"{path}: unknown key [{section}] {key}")
    return config


class _Section:
    def __init__(self, config: ConfigParser, name: str) -> None:
        self.name = name
        self.values = config[name]

    def get(self, key: str) -> Any:
        return _parse(self.values.get(key, fallback=CONFIG_DEFAULT[self.name][key]))

    def number(self, key: str, positive: bool = False) -> float:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{self.name}] {key}: expected a number, got {value!r}")
        if not math.isfinite(value) or (positive and value <= 0):
            raise ConfigError(f"[{self.name}] {key}: expected a positive number, got {value!r}")
        return float(value)

    def integer(self, key: str) -> int:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{self.name}] {key}: expected an integer, got {value!r}")
        return value

    def choice(self, key: str, choices: tuple[str, ...]) -> str:
        value = str(self.get(key))
        if value not in choices:
            raise ConfigError(f"[{self.name}] {key}: expected one of {choices}, got {value!r}")
        return value

    def pair(self, key: str) -> Optional[tuple[float, float]]:
        value = self.get(key)
        if value is None:
            return None
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = (value, value)
        if (not isinstance(value, (tuple, list)) or len(value) != 2
                or not all(isinstance(v, (int, float)) and v > 0 for v in value)):
            raise ConfigError(
                f"[{self.name}] {key}: expected None, a width, or two widths, got {value!r}"
            )
        return float(value[0]), float(value[1])


def load_run_config(
    path: Optional[str | os.PathLike] = None,
    preset: str = "paper"
) -> RunConfig:
    """
    Build a validated :class:`RunConfig`.

    Parameters
    ----------
    path : path, optional
        INI file, or JSON file with the same sections and keys. Missing
        sections and keys fall back to the preset.
    preset : {"paper"}, default "paper"
        Overridden by a top-level ``"defaults"`` string in a JSON file.

    Raises
    ------
    ConfigError
        Naming the offending section and key.
    """
    config = _read(path, preset)
    crystal = _Section(config, "Crystal")
    pump = _Section(config, "Pump")
    grid = _Section(config, "Grid")
    filters = _Section(config, "Filters")
    apertures = _Section(config, "Apertures")
    delay = _Section(config, "Delay")
    counting = _Section(config, "Counting")
    output = _Section(config, "Output")

    data_dir = crystal.get("data_dir")
    s_o, s_e = load_sellmeier(str(crystal.get("name")), data_dir)
    crystal_cfg = CrystalConfig(
        crystal.number("length_um", positive=True),
        crystal.number("cut_angle_deg"),
        s_o,
        s_e,
    )

    pump_nm = pump.number("wavelength_nm", positive=True)
    widths = filters.pair("fwhm_nm") or (math.inf, math.inf)
    center = filters.number("center_nm", positive=True)
    shape = filters.choice("shape", ("gaussian", "rectangular"))
    basis = filters.choice("basis", ("field", "intensity"))
    filter_pair = (
        FilterSpec(center, widths[0], shape, basis),
        FilterSpec(center, widths[1], shape, basis),
    )

    emission = apertures.number("emission_angle_deg", positive=True)
    distance = apertures.number("distance_mm", positive=True)
    diameter = apertures.number("diameter_mm", positive=True)
    aperture_pair = (
        ApertureGeometry(emission, distance, diameter),
        ApertureGeometry(-emission, distance, diameter),
    )

    counting_cfg = CountingConfig(
        pair_rate=counting.number("pair_rate"),
        singles_excess_rate=counting.number("singles_excess_rate"),
        window_ns=counting.number("window_ns", positive=True),
        accidental_offset_ns=counting.number("accidental_offset_ns"),
        duration_s=counting.number("duration_s", positive=True),
        jitter_sigma_ns=counting.number("jitter_sigma_ns"),
        rng_seed=counting.integer("seed"),
        n_shards=counting.integer("n_shards"),
    )

    run = RunConfig(
        crystal=crystal_cfg,
        pump_nm=pump_nm,
        pm_type=pump.choice("pm_type", get_args(PMType)),
        filters=filter_pair,
        apertures=aperture_pair,
        emission_angle_deg=emission,
        michelson_distance_mm=apertures.number("michelson_distance_mm", positive=True),
        half_count=grid.integer("half_count"),
        zeros_type2=grid.number("zeros_type2", positive=True),
        zeros_type1=grid.number("zeros_type1", positive=True),
        method=grid.choice("method", get_args(CorrelationMethod)),
        tau_min_fs=delay.number("tau_min_fs"),
        tau_max_fs=delay.number("tau_max_fs"),
        tau_step_fs=delay.number("tau_step_fs", positive=True),
        michelson_step_fs=delay.number("michelson_step_fs", positive=True),
        counting=counting_cfg,
        interference_rate=counting.number("interference_rate"),
        true_visibility=counting.number("true_visibility"),
        raw_visibility=counting.number("raw_visibility"),
        output_dir=Path(str(output.get("directory"))),
        output_format=output.choice("format", get_args(OutputFormat)),
        source=None if path is None else Path(path),
        raw={s: dict(config[s]) for s in config.sections()},
    )
    LOGGER.debug("Loaded run config from %s", path or f"preset {preset!r}")
    return run


def write_default_config(path: str | os.PathLike, preset: str = "paper") -> Path:
    """
    Write a preset as an INI file.
    """
    config = _read(None, preset)
    return atomic_write(path, config.write)
