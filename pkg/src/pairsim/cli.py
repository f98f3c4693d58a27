"""Config-driven command line: regenerates the tuning curve, conversion
spectrum, efficiency budget, detector curve, and coincidence histogram as
CSV/text, plus a ``repro`` meta-command that runs everything against the
shipped reference setup and writes an achieved-vs-target manifest.

Exit codes: 0 success, 1 configuration/validation problem, 2 numerical
(solver/bracketing) failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import detector, montecarlo, qpm, source
from .config import DEFAULT_CONFIG, RunConfig, load_run_config
from .errors import ConfigError, SolverError
from .formatting import format_number, write_lines

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems with exit code 2; the exit-code
    contract reserves 2 for numerical failures, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_range(text: str) -> tuple[float, float, float]:
    """'A:B:STEP' -> (A, B, STEP); a bare 'A' means the single point A."""
    parts = text.split(":")
    if len(parts) == 1:
        value = float(parts[0])
        return value, value, 1.0
    if len(parts) != 3:
        raise ConfigError(f"expected A:B:STEP, got '{text}'")
    return float(parts[0]), float(parts[1]), float(parts[2])


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    path = Path(override if override is not None else cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_seed(cfg: RunConfig, override: int | None) -> int:
    seed = override if override is not None else cfg.seed
    if seed is None:
        raise ConfigError("stochastic run requires an explicit seed (--seed or [run] seed)")
    return seed


def cmd_tune(cfg: RunConfig, temp_range: tuple[float, float, float],
             out: Path) -> int:
    lo, hi, step = temp_range
    curve = qpm.tuning_curve(cfg.crystal, cfg.pump_wavelength_nm, (lo, hi), step,
                             bracket_nm=cfg.signal_bracket_nm, model=cfg.sellmeier)
    qpm.write_tuning_csv(curve, out / "tuning_curve.csv")
    print(f"tuning curve: {len(curve.rows)} rows over {lo}..{hi} C "
          f"({len(curve.failures)} failed solves) -> {out / 'tuning_curve.csv'}")
    if len(curve.rows) >= 2:
        mid = 0.5 * (lo + hi)
        d_sig, d_idl = qpm.tuning_coefficient(curve, mid)
        print(f"tuning coefficient near {mid:g} C: signal {d_sig:+.4f} nm/C, "
              f"idler {d_idl:+.4f} nm/C")
    for t, reason in curve.failures:
        print(f"  skipped T={t:g} C: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, temperature_c: float, out: Path) -> int:
    solution = qpm.solve_signal(cfg.crystal, cfg.pump_wavelength_nm, temperature_c,
                                bracket_nm=cfg.signal_bracket_nm, model=cfg.sellmeier)
    width_nm, width_ghz = qpm.fwhm_bandwidth(cfg.crystal, solution, model=cfg.sellmeier)
    rows = qpm.pm_spectrum(cfg.crystal, solution, idler_span_nm=6.0 * width_nm,
                           n_points=401, model=cfg.sellmeier)
    qpm.write_spectrum_csv(rows, out / "pm_spectrum.csv")
    print(f"operating point at {temperature_c:g} C: signal {solution.signal_nm:.3f} nm, "
          f"idler {solution.idler_nm:.3f} nm")
    print(f"FWHM: {width_nm:.4f} nm ({width_ghz:.2f} GHz) in the idler "
          f"-> {out / 'pm_spectrum.csv'}")
    return EXIT_OK


def _detection_chain(cfg: RunConfig) -> source.LossChain:
    """Idler loss chain with the APD quantum efficiency appended."""
    qe = detector.qe_at_overbias(cfg.apd, cfg.overbias_v)
    return source.LossChain(stages=cfg.experiment.idler_chain.stages + (("apd_qe", qe),))


def cmd_budget(cfg: RunConfig, out: Path) -> int:
    chain = _detection_chain(cfg)
    for line in source.render_budget_text(chain):
        print(line)
    source.write_budget_csv(chain, out / "budget.csv")

    lines_extra = []
    coupling = cfg.experiment.idler_chain.get("coupling_matching")
    fiber = cfg.experiment.signal_chain.get("fiber_coupling")
    if coupling is not None and fiber is not None:
        ratio = source.mode_matching_ratio(coupling, fiber)
        lines_extra.append(f"signal-idler mode matching: {ratio:.4f}")
    signal_detection = source.LossChain(
        stages=cfg.experiment.signal_chain.stages + (("spcm_qe", cfg.spcm.efficiency),))
    inferred = source.infer_generation_rate(
        cfg.budget.detected_signal_rate_per_mw, signal_detection)
    lines_extra.append(f"inferred single-mode generation rate: {inferred:.6g} /s/mW")
    brightness = source.spectral_brightness(
        cfg.budget.freespace_pair_rate_per_mw, cfg.budget.signal_bandwidth_ghz)
    lines_extra.append(f"free-space spectral brightness: {brightness:.6g} pairs/s/GHz/mW")
    for line in lines_extra:
        print(line)
    write_lines(out / "budget.txt", source.render_budget_text(chain) + lines_extra)
    return EXIT_OK


def cmd_detector(cfg: RunConfig, sweep: tuple[float, float, float], out: Path) -> int:
    lo, hi, step = sweep
    if hi < lo or step <= 0:
        raise ConfigError(f"bad overbias sweep {lo}:{hi}:{step}")
    n = int(round((hi - lo) / step)) if hi > lo else 0
    volts = [lo + k * step for k in range(n + 1)]
    detector.write_detector_csv(cfg.apd, volts, out / "detector_curve.csv")
    print(f"detector curve: {len(volts)} points over {lo}..{hi} V "
          f"-> {out / 'detector_curve.csv'}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path, seed: int | None, triggers: int | None,
                 analytic: bool, overbias: float | None) -> int:
    experiment = cfg.experiment
    if triggers is not None:
        experiment = dataclasses.replace(experiment, n_triggers=triggers, duration_s=None)
    overbias_v = overbias if overbias is not None else cfg.overbias_v

    expected = montecarlo.analytic_expectation(experiment, cfg.apd, cfg.spcm, overbias_v)
    if analytic:
        hist = expected
    else:
        run_seed = _require_seed(cfg, seed)
        hist = montecarlo.simulate(experiment, cfg.apd, cfg.spcm, overbias_v, run_seed)
    montecarlo.write_histogram_csv(hist, expected, out / "histogram.csv")

    window = montecarlo.coincidence_window_sum(
        hist, montecarlo.DEFAULT_COINCIDENCE_WINDOW_NS)
    print(f"{'analytic expectation' if analytic else 'simulated'} histogram "
          f"({hist.n_triggers} triggers) -> {out / 'histogram.csv'}")
    print(f"eta_c_total = {format_number(hist.eta_c_total)}  "
          f"(best 4-ns window sum {format_number(window)})")
    print(f"trigger rate {format_number(hist.trigger_rate_hz)} /s, "
          f"discard fraction {format_number(hist.discard_fraction)}")
    return EXIT_OK


def _repro_figures(cfg: RunConfig, seed: int) -> list[dict]:
    """Compute every reference figure and its acceptance band."""
    solution = qpm.solve_signal(cfg.crystal, cfg.pump_wavelength_nm, cfg.temperature_c,
                                bracket_nm=cfg.signal_bracket_nm, model=cfg.sellmeier)
    period = qpm.calibrate_period(cfg.crystal, cfg.pump_wavelength_nm,
                                  solution.signal_nm, cfg.temperature_c,
                                  model=cfg.sellmeier)
    curve = qpm.tuning_curve(cfg.crystal, cfg.pump_wavelength_nm, (140.0, 185.0), 5.0,
                             bracket_nm=cfg.signal_bracket_nm, model=cfg.sellmeier)
    _, d_idler = qpm.tuning_coefficient(curve, 160.0)
    width_nm, width_ghz = qpm.fwhm_bandwidth(cfg.crystal, solution, model=cfg.sellmeier)

    chain = _detection_chain(cfg)
    eta_chain = source.chain_efficiency(chain)
    coupling = cfg.experiment.idler_chain.get("coupling_matching")
    fiber = cfg.experiment.signal_chain.get("fiber_coupling")
    mode_match = source.mode_matching_ratio(coupling, fiber) \
        if coupling is not None and fiber is not None else float("nan")
    signal_detection = source.LossChain(
        stages=cfg.experiment.signal_chain.stages + (("spcm_qe", cfg.spcm.efficiency),))
    inferred = source.infer_generation_rate(
        cfg.budget.detected_signal_rate_per_mw, signal_detection)
    brightness = source.spectral_brightness(
        cfg.budget.freespace_pair_rate_per_mw, cfg.budget.signal_bandwidth_ghz)

    sim = montecarlo.simulate(cfg.experiment, cfg.apd, cfg.spcm, cfg.overbias_v, seed)
    dark_free = dataclasses.replace(cfg.apd, dark_prob_per_gate=0.0)
    sim_pairs = montecarlo.simulate(cfg.experiment, dark_free, cfg.spcm,
                                    cfg.overbias_v, seed)
    pair_fraction = (montecarlo.coincidence_window_sum(sim_pairs, 4.0)
                     / sim_pairs.eta_c_total) if sim_pairs.eta_c_total > 0 else 0.0

    return [
        {"name": "signal_nm", "achieved": solution.signal_nm, "lo": 803.0, "hi": 813.0},
        {"name": "idler_nm", "achieved": solution.idler_nm, "lo": 1544.0, "hi": 1574.0},
        {"name": "grating_period_um", "achieved": period, "lo": 21.1, "hi": 22.1},
        {"name": "idler_tuning_nm_per_c", "achieved": abs(d_idler), "lo": 0.65, "hi": 1.95},
        {"name": "fwhm_nm", "achieved": width_nm, "lo": 1.008, "hi": 1.512},
        {"name": "fwhm_ghz", "achieved": width_ghz, "lo": 120.0, "hi": 180.0},
        {"name": "conditional_chain_efficiency", "achieved": eta_chain,
         "lo": 0.0290, "hi": 0.0322},
        {"name": "mode_matching", "achieved": mode_match, "lo": 0.35, "hi": 0.37},
        {"name": "inferred_singlemode_rate_per_mw", "achieved": inferred,
         "lo": 1.17e5, "hi": 1.44e5},
        {"name": "spectral_brightness", "achieved": brightness, "lo": 8.8e4, "hi": 9.8e4},
        {"name": "eta_c_total_simulated", "achieved": sim.eta_c_total,
         "lo": 0.0290, "hi": 0.0322},
        {"name": "pair_fraction_best_4ns", "achieved": pair_fraction,
         "lo": 0.95, "hi": 1.0},
    ]


def cmd_repro(cfg: RunConfig, out: Path, seed: int | None) -> int:
    run_seed = _require_seed(cfg, seed)
    cmd_tune(cfg, (140.0, 185.0, 5.0), out)
    cmd_spectrum(cfg, cfg.temperature_c, out)
    cmd_budget(cfg, out)
    cmd_detector(cfg, (0.5, 4.0, 0.1), out)
    cmd_simulate(cfg, out, run_seed, None, False, None)

    figures = _repro_figures(cfg, run_seed)
    for fig in figures:
        fig["pass"] = bool(fig["lo"] <= fig["achieved"] <= fig["hi"])
    manifest = {"figures": figures, "all_pass": all(f["pass"] for f in figures)}
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for fig in figures:
        status = "PASS" if fig["pass"] else "FAIL"
        print(f"{status} {fig['name']}: {fig['achieved']:.6g} "
              f"(target {fig['lo']:.6g} .. {fig['hi']:.6g})")
    print(f"manifest -> {out / 'manifest.json'}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="pairsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=DEFAULT_CONFIG,
                       help="run configuration INI (default: shipped reference setup)")
        p.add_argument("--out", default=None, help="output directory")

    p_tune = sub.add_parser("tune", help="temperature tuning curve CSV + coefficient report")
    common(p_tune)
    p_tune.add_argument("--temp-range", default="140:185:5", metavar="A:B:STEP")

    p_spec = sub.add_parser("spectrum", help="conversion spectrum CSV + FWHM report")
    common(p_spec)
    p_spec.add_argument("--temp-range", default=None, metavar="T",
                        help="operating temperature (defaults to the configured one)")

    p_budget = sub.add_parser("budget", help="efficiency budget table")
    common(p_budget)

    p_det = sub.add_parser("detector-curve", help="QE/dark vs overbias CSV")
    common(p_det)
    p_det.add_argument("--overbias", default="0.5:4.0:0.1", metavar="A:B:STEP")

    p_sim = sub.add_parser("simulate", help="coincidence histogram CSV + summary")
    common(p_sim)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--triggers", type=int, default=None)
    p_sim.add_argument("--analytic", action="store_true",
                       help="write the expectation histogram (no sampling)")
    p_sim.add_argument("--overbias", type=float, default=None, metavar="V")

    p_repro = sub.add_parser("repro", help="run all subcommands and write the manifest")
    common(p_repro)
    p_repro.add_argument("--seed", type=int, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config)
        out = _out_dir(cfg, args.out)
        if args.command == "tune":
            return cmd_tune(cfg, _parse_range(args.temp_range), out)
        if args.command == "spectrum":
            temp = (_parse_range(args.temp_range)[0] if args.temp_range is not None
                    else cfg.temperature_c)
            return cmd_spectrum(cfg, temp, out)
        if args.command == "budget":
            return cmd_budget(cfg, out)
        if args.command == "detector-curve":
            return cmd_detector(cfg, _parse_range(args.overbias), out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.seed, args.triggers,
                                args.analytic, args.overbias)
        if args.command == "repro":
            return cmd_repro(cfg, out, args.seed)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, ValueError) as exc:
        print(f"pairsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"pairsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
