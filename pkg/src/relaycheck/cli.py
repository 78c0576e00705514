"""Command-line interface.

Subcommands: simulate, calibrate, detect, check-manipulable, reproduce-figure.
Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import detector, harness
from .errors import ConfigError, NumericError
from .stats import empirical_cond_cdf


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2 for
    # numeric failures, so remap.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="relaycheck",
                     description="Byzantine-relay detection experiments on a two-hop Gaussian network")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--trials", type=int, default=None, help="override the config trial count")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")

    p_sim = sub.add_parser("simulate", help="run the configured experiment and write its report")
    common(p_sim)
    p_sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p_cal = sub.add_parser("calibrate", help="run the honest arm only and print the threshold")
    common(p_cal)

    p_det = sub.add_parser("detect", help="score one observed block from a CSV with header x,y")
    p_det.add_argument("sample", help="CSV file with header x,y, one observation pair per row")
    common(p_det)

    p_chk = sub.add_parser("check-manipulable",
                           help="probe whether a forwarding kernel is invisible to the detector")
    p_chk.add_argument("--config", required=True)
    p_chk.add_argument("--kernel", choices=("marginal", "identity"), default="marginal")
    p_chk.add_argument("--width", type=float, default=1e-3,
                       help="blur width for the identity kernel")
    p_chk.add_argument("--tol", type=float, default=1e-7)

    p_fig = sub.add_parser("reproduce-figure", help="run a preset block-length sweep")
    p_fig.add_argument("figure", choices=sorted(harness.FIGURE_PRESETS),
                       help="preset number")
    p_fig.add_argument("--seed", type=int, default=None)
    p_fig.add_argument("--trials", type=int, default=None)
    p_fig.add_argument("--out", default=None)
    p_fig.add_argument("--jobs", type=int, default=1)
    p_fig.add_argument("--no-figures", action="store_true")
    return parser


def _load(args) -> harness.ExperimentConfig:
    config = harness.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "out", None) is not None:
        overrides["out"] = args.out
    if overrides:
        config = harness.validate_config(replace(config, **overrides))
    return config


def _read_sample(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read sample file {path}: {exc}") from None
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise ConfigError(f"sample file {path} must start with the header 'x,y'")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ConfigError(f"sample file {path} contains no observation rows")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in body])
    except (ValueError, IndexError):
        raise ConfigError(f"sample file {path} has malformed rows; expected two floats per row") from None
    return data[:, 0], data[:, 1]


def cmd_simulate(args) -> int:
    config = _load(args)
    report = harness.run_experiment(config, jobs=args.jobs)
    written = harness.emit_report(report, figures=not args.no_figures)
    print(f"threshold = {report.policy.threshold:.6g} "
          f"(quantile {config.quantile:g} of {config.trials} honest trials)")
    if report.attack is not None:
        print(f"ks = {report.ks:.6g}")
        print(f"flagged: honest {report.honest_verdicts.mean():.1%}, "
              f"{config.strategy} {report.attack_verdicts.mean():.1%}")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_calibrate(args) -> int:
    config = _load(args)
    honest_config = harness.validate_config(replace(config, strategy="honest"))
    report = harness.run_experiment(honest_config, jobs=args.jobs)
    written = harness.emit_report(report, figures=False)
    print(f"threshold = {report.policy.threshold:.17g}")
    print(f"quantile = {config.quantile:g}, honest trials = {config.trials}")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_detect(args) -> int:
    config = _load(args)
    x, y = _read_sample(args.sample)
    # Calibrate at the observed block length so the threshold is comparable.
    config = harness.validate_config(replace(config, n=x.size))
    grids = harness.grids_for(config)
    reference = harness.reference_for(config, grids)
    table = empirical_cond_cdf(y, grids.x.quantize(x), grids.t_points, grids.x.bin_count)
    statistic = detector.decision_statistic(table, reference)
    policy = detector.calibrate_threshold(config, jobs=args.jobs)
    outcome = detector.detect(statistic, policy)
    print(f"d_n = {outcome.statistic:.17g}")
    print(f"threshold = {outcome.threshold:.17g}")
    print(f"verdict = {'malicious' if outcome.malicious else 'honest'}")
    return 0


def cmd_check_manipulable(args) -> int:
    config = harness.load_config(args.config)
    if args.kernel == "marginal":
        kernel = detector.marginal_mimic_kernel(config.params)
    else:
        kernel = detector.near_identity_kernel(args.width)
    report = detector.check_manipulable(config.params, kernel, tol=args.tol)
    print(f"kernel = {kernel.label}")
    print(f"max_gap = {report.max_gap:.6g}")
    print(f"manipulable_at_tol = {str(report.manipulable_at_tol).lower()} (tol {report.tol:g})")
    return 0


def cmd_reproduce_figure(args) -> int:
    results = harness.reproduce_figure(
        args.figure, out_dir=args.out, seed=args.seed, trials=args.trials,
        jobs=args.jobs, figures=not args.no_figures,
    )
    for n, report in results:
        ks_text = "" if report.ks is None else f", ks = {report.ks:.4g}"
        print(f"n = {n}: threshold = {report.policy.threshold:.6g}{ks_text}")
    out = args.out if args.out is not None else f"runs/figure{args.figure}"
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "check-manipulable": cmd_check_manipulable,
    "reproduce-figure": cmd_reproduce_figure,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"relaycheck: config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"relaycheck: error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"relaycheck: numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
