"""Command-line front end: ``run``, ``check`` and ``presets``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import PRESETS, ConfigError, load_config, preset_path
from .graph import spectral_report
from .plots import error_svg, formation_svg
from .sim import (LyapunovMonitor, PreflightError, SimulationAbort, build_loop, initial_state, metrics,
                  oracle_weights, preflight, simulate)

EXIT_OK, EXIT_CHECK, EXIT_ABORT = 0, 1, 2
METADATA_KIND = "nnformation-run-metadata"


def _spectral_lines(spectral) -> list[str]:
    eig = ", ".join(f"{e:.6g}" for e in spectral.laplacian_eigenvalues)
    return [
        f"connected: {'yes' if spectral.connected else 'no'} ({spectral.components} component(s))",
        f"Laplacian eigenvalues: [{eig}]",
        f"lambda_min(L + D): {spectral.augmented_min_eigenvalue:.6g}",
    ]


def cmd_check(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    spectral = spectral_report(cfg.build_topology())
    for line in _spectral_lines(spectral):
        print(line)
    if not spectral.connected:
        print("FAIL  topology is not connected")
        return EXIT_CHECK
    try:
        _, report = preflight(cfg, allow_unstable_gains=True)
    except (PreflightError, ValueError) as exc:
        print(f"FAIL  {exc}")
        return EXIT_CHECK
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK


def _metadata(cfg, spectral, report, monitor, fit_reports, summary) -> dict:
    meta = {
        "kind": METADATA_KIND,
        "library_version": __version__,
        "config": cfg.to_dict(),
        "spectral": {
            "connected": bool(spectral.connected),
            "components": int(spectral.components),
            "laplacian_eigenvalues": [float(e) for e in spectral.laplacian_eigenvalues],
            "lambda_min": float(spectral.augmented_min_eigenvalue),
        },
        "gain_check": report.to_dict(),
        "lyapunov": {"mode": monitor.mode, "certifying": monitor.certifying},
        "summary": summary.to_dict(),
    }
    if fit_reports:
        meta["oracle_fit"] = {
            "max_residual": max(r.max_residual for r in fit_reports),
            "rms_residual": float(np.sqrt(np.mean([r.rms_residual**2 for r in fit_reports]))),
            "rank_deficient": any(r.rank_deficient for r in fit_reports),
        }
    return meta


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    allow = args.allow_unstable_gains
    if allow:
        cfg.gains.allow_unstable = True
    try:
        spectral, report = preflight(cfg, allow)
    except PreflightError as exc:
        if exc.spectral is not None:
            for line in _spectral_lines(exc.spectral):
                print(line)
        if exc.gain_report is not None:
            for line in exc.gain_report.lines():
                print(line)
        print(f"refusing to run: {exc}", file=sys.stderr)
        if exc.gain_report is not None:
            print("pass --allow-unstable-gains to override", file=sys.stderr)
        return EXIT_CHECK
    for line in report.lines():
        print(line)

    fit_reports = []
    w_star = None
    if cfg.sim.lyapunov_mode == "oracle":
        w_star, fit_reports = oracle_weights(cfg)
    monitor = LyapunovMonitor(cfg.build_topology(), cfg.build_gains(), cfg.build_params(), w_star)
    if not monitor.certifying:
        print("warning: Lyapunov block matrix is not positive definite; V is non-certifying")
    try:
        log = simulate(build_loop(cfg), initial_state(cfg), cfg.sim.dt, cfg.sim.duration, cfg.sim.sample_period,
                       cfg.build_disturbances(), monitor, cfg.sim.weight_bound)
    except SimulationAbort as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT

    out = Path(args.out) if args.out else Path("runs") / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    summary = metrics(log, cfg.sim.tolerance, cfg.sim.burn_in)
    log.write_csv(out / cfg.outputs.csv)
    meta = _metadata(cfg, spectral, report, monitor, fit_reports, summary)
    (out / "metadata.yaml").write_text(yaml.safe_dump(meta, sort_keys=False, default_flow_style=None))
    lines = [f"scenario {cfg.name}: n={cfg.n}, duration {cfg.sim.duration:g} s, dt {cfg.sim.dt:g} s"]
    lines += report.lines() + [f"Lyapunov mode: {monitor.mode}"] + summary.lines()
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.outputs.plots and not args.no_plots:
        (out / "errors.svg").write_text(error_svg(log, cfg.name))
        (out / "formation.svg").write_text(formation_svg(log, cfg.build_offsets()))
    for line in summary.lines():
        print(line)
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESETS:
        print(f"{name}\t{preset_path(name)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnformation",
                                     description="Adaptive NN leader-follower formation control simulator")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write logs and plots")
    run.add_argument("config", help="scenario file or preset name")
    run.add_argument("--out", help="output directory (default runs/<name>)")
    run.add_argument("--allow-unstable-gains", action="store_true",
                     help="run even when the gain conditions fail")
    run.add_argument("--no-plots", action="store_true", help="skip SVG output")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="print the spectral report and gain-condition margins")
    check.add_argument("config", help="scenario file or preset name")
    check.set_defaults(func=cmd_check)

    presets = sub.add_parser("presets", help="list shipped scenarios")
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
