import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from spdc.config import CONFIG_DEFAULT, RunConfig, load_run_config, write_default_config
from spdc.errors import ConfigError

REPO_INI = Path(__file__).resolve().parent.parent / "spdc.ini"


def test_default_preset():
    run = load_run_config()
    assert run.pump_nm == 351.1
    assert run.degenerate_nm == pytest.approx(702.2)
    assert run.crystal.length_um == 2000.0
    assert run.pm_type == "II"
    assert not run.filtered
    assert run.apertures[0].center_angle_deg == 3.0
    assert run.apertures[1].center_angle_deg == -3.0
    assert run.counting.rng_seed == 0
    assert run.output_format == "csv"


def test_checked_in_ini_matches_preset():
    assert replace(load_run_config(REPO_INI), source=None) == load_run_config()


def test_write_default_config_round_trip(tmp_path):
    path = write_default_config(tmp_path / "spdc.ini")
    assert replace(load_run_config(path), source=None) == load_run_config()
    assert "[Counting]" in path.read_text()


def test_ini_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[Filters]\n"
        "fwhm_nm = 3.0  # both arms\n"
        "[Counting]\n"
        "seed = 42\n"
        "[Pump]\n"
        "pm_type = I\n"
    )
    run = load_run_config(path)
    assert run.filtered
    assert [f.fwhm_nm for f in run.filters] == [3.0, 3.0]
    assert run.counting.rng_seed == 42
    assert run.pm_type == "I"
    assert run.source == path


def test_per_arm_filter_widths(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[Filters]\nfwhm_nm = (3.0, 20.0)\n")
    assert [f.fwhm_nm for f in load_run_config(path).filters] == [3.0, 20.0]


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "Crystal": {"length_um": 1000.0},
        "Output": {"format": "json", "directory": str(tmp_path / "out")},
    }))
    run = load_run_config(path)
    assert run.crystal.length_um == 1000.0
    assert run.output_format == "json"
    assert run.output_dir == tmp_path / "out"


def test_json_defaults_key_selects_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"defaults": "paper", "Counting": {"seed": 3}}))
    run = load_run_config(path)
    assert run.counting.rng_seed == 3
    assert replace(run, counting=load_run_config().counting, source=None) == load_run_config()


@pytest.mark.parametrize("defaults", ["lab", 7])
def test_json_unknown_defaults(tmp_path, defaults):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"defaults": defaults}))
    with pytest.raises(ConfigError, match="unknown preset"):
        load_run_config(path)


@pytest.mark.parametrize("text", [
    "[Crystal]\nlength_um = -5\n",
    "[Crystal]\nlength_um = thick\n",
    "[Pump]\npm_type = III\n",
    "[Grid]\nhalf_count = 12.5\n",
    "[Grid]\nmethod = slow\n",
    "[Filters]\nfwhm_nm = (3.0, 4.0, 5.0)\n",
    "[Delay]\ntau_min_fs = 10\ntau_max_fs = -10\n",
    "[Counting]\nraw_visibility = 0.9\n",
    "[Output]\nformat = xml\n",
    "[Lasers]\npower = 1\n",
    "[Pump]\npower_mw = 1\n",
    "not an ini file",
])
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_missing_file_and_preset(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        load_run_config(preset="lab")


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2")
    with pytest.raises(ConfigError):
        load_run_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_delay_grid():
    run = load_run_config()
    taus = run.taus()
    assert taus[0] == -600.0
    assert taus[-1] == pytest.approx(600.0)
    assert np.allclose(np.diff(taus), 1.0)
    assert run.taus(run.michelson_step_fs).size == 6001


def test_helpers():
    run = load_run_config()
    assert run.with_seed(5).counting.rng_seed == 5
    narrow = run.with_filters(3.0)
    assert narrow.filtered and not run.filtered
    assert all(math.isinf(f.fwhm_nm) for f in run.filters)


def test_defaults_cover_every_section():
    assert set(CONFIG_DEFAULT) == {
        "Crystal", "Pump", "Grid", "Filters", "Apertures", "Delay", "Counting", "Output"
    }
    assert isinstance(load_run_config(), RunConfig)
