"""
Command-line front end.

    python -m spdc [--config FILE] [--out DIR] [--format csv|json|svg] <command>

Every command writes its table as CSV with a JSON sidecar (or a single
JSON document with ``--format json``; ``--format svg`` adds a plot).
Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .config import RunConfig, load_run_config
from .correlation import fwhm, g1_envelope, g2
from .crystal_optics import (
    group_delay_mismatch, gvd, index, solve_collinear_pm_angle
)
from .errors import ConfigError, NumericalError, SPDCError
from .interferometry import (
    envelope_width, hom_closed, hom_general, michelson, visibility
)
from .io import write_csv, write_json, write_svg
from .montecarlo_detection import extract_coincidences, simulate_mca
from .reproduce import run_anchors
from .spectral_model import (
    DetuningGrid, SpectralAmplitude, apply_filters, apply_quadratic_phase,
    build_type1, build_type2, spectral_fwhm_nm, to_frame
)
from .tuning_curve import (
    calibrate_pump_angle, conjugate_wavelength, pair_window, tuning_curve
)

LOGGER = logging.getLogger(__name__)

COMMANDS = (
    "indices", "pm-angle", "spectrum", "g1", "g2", "michelson", "hom",
    "tuning", "pair-window", "mca-sim", "reproduce-paper",
)
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


__all__ = ["COMMANDS", "build_parser", "build_amplitude", "emit", "dispatch", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdc",
        description="Simulate SPDC biphoton wavepackets and their interference.",
    )
    parser.add_argument("--config", type=Path, help="INI or JSON run configuration")
    parser.add_argument("--preset", default="paper", help="built-in defaults (default: paper)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, help="Monte-Carlo seed")
    parser.add_argument("--format", choices=("csv", "json", "svg"), dest="output_format")
    parser.add_argument("-v", "--verbose", action="count", default=0)

    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands.add_parser("indices", help="refractive indices over the data range")
    commands.add_parser("pm-angle", help="phase-matching angles and group parameters")
    for name, text in (
        ("spectrum", "biphoton spectral amplitude"),
        ("g1", "first-order correlation envelope"),
        ("g2", "second-order correlation"),
    ):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--beta", type=float, default=0.0, help="quadratic phase in fs^2")
    commands.add_parser("michelson", help="single-count Michelson fringes")
    hom = commands.add_parser("hom", help="two-photon coincidence dip or peak")
    hom.add_argument("--sign", choices=("minus", "plus"), default="minus")
    hom.add_argument("--theta1", type=float, help="analyzer 1 angle in degrees")
    hom.add_argument("--theta2", type=float, help="analyzer 2 angle in degrees")
    tuning = commands.add_parser("tuning", help="non-collinear type-I tuning curve")
    tuning.add_argument("--span-nm", type=float, default=100.0)
    tuning.add_argument("--step-nm", type=float, default=1.0)
    commands.add_parser("pair-window", help="aperture-limited pair spectral window")
    mca = commands.add_parser("mca-sim", help="simulate the TAC/MCA histogram")
    mca.add_argument("--rate", type=float, help="normalized interference rate")
    commands.add_parser("reproduce-paper", help="check every published anchor")
    return parser


def build_amplitude(
    run: RunConfig,
    pm_type: Optional[str] = None,
    beta: float = 0.0,
    filtered: bool = True
) -> SpectralAmplitude:
    """
    Spectral amplitude of the configured crystal, filters applied.
    """
    pm_type = pm_type or run.pm_type
    crystal = run.crystal
    degenerate = run.degenerate_nm
    theta = solve_collinear_pm_angle(run.pump_nm, degenerate, pm_type, crystal)
    match pm_type:
        case "II":
            D = group_delay_mismatch(crystal, degenerate, theta)
            grid = DetuningGrid.for_type2(D, crystal.length_um, run.zeros_type2, run.half_count)
            T = build_type2(D, crystal.length_um, grid, degenerate)
        case "I":
            Dpp = float(gvd(crystal, degenerate, "o"))
            grid = DetuningGrid.for_type1(Dpp, crystal.length_um, run.zeros_type1, run.half_count)
            T = build_type1(Dpp, crystal.length_um, grid, degenerate)
        case _:
            raise ConfigError(f"unknown phase-matching type {pm_type!r}")
    if filtered and run.filtered:
        T = apply_filters(T, *run.filters)
    return apply_quadratic_phase(T, beta)


def emit(
    run: RunConfig,
    name: str,
    frame: pd.DataFrame,
    summary: dict,
    plot: Optional[tuple[str, list[str], str, str]] = None
) -> list[Path]:
    """
    Write one command's artifacts.

    Parameters
    ----------
    run : RunConfig
    name : str
        File stem.
    frame : pd.DataFrame
        The table.
    summary : dict
        JSON metadata.
    plot : tuple, optional
        ``(x column, y columns, x label, y label)`` for SVG output.
    """
    out = run.output_dir
    written = []
    document = {"command": name, **summary}
    match run.output_format:
        case "json":
            document["data"] = frame.to_dict(orient="list")
            written.append(write_json(document, out / f"{name}.json", run.schema_version))
        case "csv" | "svg":
            written.append(write_csv(frame, out / f"{name}.csv"))
            written.append(write_json(document, out / f"{name}.json", run.schema_version))
            if run.output_format == "svg" and plot is not None:
                x, ys, xlabel, ylabel = plot
                written.append(write_svg(
                    out / f"{name}.svg",
                    frame[x].to_numpy(),
                    {y: frame[y].to_numpy() for y in ys},
                    xlabel, ylabel, name,
                ))
    return written


def _indices(run: RunConfig) -> None:
    crystal = run.crystal
    lo = max(crystal.sellmeier_o.valid_range_nm[0], crystal.sellmeier_e.valid_range_nm[0])
    hi = min(crystal.sellmeier_o.valid_range_nm[1], crystal.sellmeier_e.valid_range_nm[1])
    lam = np.linspace(lo, hi, 421)
    theta = solve_collinear_pm_angle(run.pump_nm, run.degenerate_nm, run.pm_type, crystal)
    frame = pd.DataFrame({
        "lambda_nm": lam,
        "n_o": index(lam, "o", 0.0, crystal),
        "n_e_principal": crystal.sellmeier_e.index(lam),
        "n_e_theta_pm": index(lam, "e", theta, crystal),
    })
    emit(run, "indices", frame, {"theta_pm_deg": theta, "crystal": crystal.sellmeier_o.name},
         ("lambda_nm", ["n_o", "n_e_principal", "n_e_theta_pm"], "wavelength (nm)", "index"))


def _pm_angle(run: RunConfig) -> None:
    crystal = run.crystal
    degenerate = run.degenerate_nm
    rows = []
    for pm_type in ("I", "II"):
        theta = solve_collinear_pm_angle(run.pump_nm, degenerate, pm_type, crystal)
        rows.append({"pm_type": pm_type, "theta_pm_deg": theta})
    theta_ii = rows[1]["theta_pm_deg"]
    D = group_delay_mismatch(crystal, degenerate, theta_ii)
    Dpp = float(gvd(crystal, degenerate, "o"))
    summary = {
        "D_fs_per_um": D,
        "Dpp_fs2_per_um": Dpp,
        "type2_delay_fs": D * crystal.length_um / 2,
        "length_um": crystal.length_um,
    }
    for row in rows:
        print(f"type-{row['pm_type']} phase matching at {row['theta_pm_deg']:.4f} deg")
    print(f"D = {D:.6g} fs/um, D'' = {Dpp:.6g} fs^2/um, D*L/2 = {summary['type2_delay_fs']:.2f} fs")
    emit(run, "pm_angle", pd.DataFrame(rows), summary)


def _spectrum(run: RunConfig, beta: float) -> None:
    T = build_amplitude(run, beta=beta)
    frame = to_frame(T)
    frame.insert(1, "signal_nm", T.signal_nm())
    emit(run, "spectrum", frame, {
        "kind": T.kind,
        "source": T.description,
        "spectral_fwhm_nm": spectral_fwhm_nm(T),
        "group_delay_fs": T.group_delay_fs,
    }, ("signal_nm", ["abs"], "signal wavelength (nm)", "|T|"))


def _correlation(run: RunConfig, kind: str, beta: float) -> None:
    T = build_amplitude(run, beta=beta)
    taus = run.taus()
    trace = (g1_envelope if kind == "g1" else g2)(T, taus, method=run.method)
    width = fwhm(trace)
    emit(run, kind, trace.to_frame(), {
        **trace.describe(),
        "fwhm_fs": width.value,
        "multimodal": width.multimodal,
        "beta_fs2": beta,
    }, ("tau_fs", ["value"], "delay (fs)", kind))


def _michelson(run: RunConfig) -> None:
    T = build_amplitude(run)
    pattern = michelson(T, run.taus(run.michelson_step_fs), method=run.method)
    emit(run, "michelson", pattern.to_frame(), {
        **pattern.describe(),
        "envelope_fwhm_fs": envelope_width(pattern),
    }, ("tau_fs", ["rate", "envelope"], "delay (fs)", "normalized rate"))


def _hom(run: RunConfig, sign: str, theta1: Optional[float], theta2: Optional[float]) -> None:
    T = build_amplitude(run)
    taus = run.taus()
    dip = hom_closed(T, taus, "minus", method=run.method)
    peak = hom_closed(T, taus, "plus", method=run.method)
    if theta1 is not None or theta2 is not None:
        theta1 = 45.0 if theta1 is None else theta1
        theta2 = 45.0 if theta2 is None else theta2
        pattern = hom_general(T, taus, theta1, theta2, method=run.method)
    else:
        pattern = dip if sign == "minus" else peak
    try:
        width = envelope_width(pattern)
    except NumericalError as e:
        LOGGER.warning("No dip width: %s", e)
        width = None
    emit(run, "hom", pattern.to_frame(), {
        **pattern.describe(),
        "fwhm_fs": width,
        "visibility": visibility(dip, peak),
        "type2_delay_fs": T.group_delay_fs,
    }, ("tau_fs", ["rate"], "delay (fs)", "coincidence rate"))


def _tuning(run: RunConfig, span_nm: float, step_nm: float) -> None:
    geometry = calibrate_pump_angle(run.crystal, run.pump_nm, run.emission_angle_deg)
    degenerate = run.degenerate_nm
    lam = np.arange(degenerate - span_nm, degenerate + span_nm + step_nm / 2, step_nm)
    frames = [
        tuning_curve(geometry, lam, branch).to_frame() for branch in ("signal", "idler")
    ]
    emit(run, "tuning", pd.concat(frames, ignore_index=True), {
        "pump_angle_deg": geometry.pump_angle_deg,
        "pump_angle_calibrated": geometry.calibrated,
        "conjugate_662_nm": conjugate_wavelength(662.0, run.pump_nm),
    })


def _pair_window(run: RunConfig) -> None:
    geometry = calibrate_pump_angle(run.crystal, run.pump_nm, run.emission_angle_deg)
    pw = pair_window(geometry, *run.apertures, run.filters)
    emit(run, "pair_window", pw.to_frame(), pw.summary(),
         ("nu_rad_per_fs", ["weight"], "detuning (rad/fs)", "pair acceptance"))


def _mca_sim(run: RunConfig, rate: Optional[float]) -> None:
    rate = run.interference_rate if rate is None else rate
    histogram = simulate_mca(run.counting, rate)
    counts = extract_coincidences(
        histogram, run.counting.window_ns, run.counting.accidental_offset_ns,
        pileup_correction=True,
    )
    print(
        f"true window {counts.true_counts:.1f}, "
        f"accidental window {counts.accidental_counts:.1f} (pile-up corrected)"
    )
    emit(run, "mca", histogram.to_frame(), {
        **histogram.metadata,
        "true_counts": counts.true_counts,
        "accidental_counts": counts.accidental_counts,
        "peak_ns": counts.peak_ns,
        "pileup_corrected": True,
        "total_starts": histogram.total_starts,
    }, ("bin_start_ns", ["counts"], "start-stop delay (ns)", "counts"))


def _reproduce_paper(run: RunConfig) -> bool:
    table = run_anchors(run)
    passed = bool(table["passed"].all())
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    if passed:
        print("all anchors pass")
    else:
        print(f"{(~table['passed']).sum()} anchor(s) failed")
    emit(run, "reproduce_paper", table, {
        "passed": passed,
        "failed": table.loc[~table["passed"], "quantity"].tolist(),
    })
    return passed


def dispatch(args: argparse.Namespace) -> int:
    """
    Load the configuration and execute one command.
    """
    cfg = load_run_config(args.config, args.preset)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.output_format is not None:
        cfg = replace(cfg, output_format=args.output_format)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    LOGGER.info("Running %s", args.command)
    match args.command:
        case "indices":
            _indices(cfg)
        case "pm-angle":
            _pm_angle(cfg)
        case "spectrum":
            _spectrum(cfg, args.beta)
        case "g1" | "g2":
            _correlation(cfg, args.command, args.beta)
        case "michelson":
            _michelson(cfg)
        case "hom":
            _hom(cfg, args.sign, args.theta1, args.theta2)
        case "tuning":
            _tuning(cfg, args.span_nm, args.step_nm)
        case "pair-window":
            _pair_window(cfg)
        case "mca-sim":
            _mca_sim(cfg, args.rate)
        case "reproduce-paper":
            return EXIT_OK if _reproduce_paper(cfg) else EXIT_NUMERICAL
        case command:
            raise ConfigError(f"unknown command {command!r}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SPDCError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
