"""Experiment harness: configuration, reproducible Monte Carlo trials, reports.

A trial samples one transmission block, lets the configured relay strategy
forward it, and scores the destination's decision statistic against the
analytic reference.  Experiments run a calibration (honest) arm and, when the
configured strategy is dishonest, an attack arm with the same trial count.

Per-trial randomness is keyed by (seed, arm-id, trial-index), so results are
independent of worker count and identical across reruns; report CSVs are
byte-stable.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from . import detector, quantizer, relay
from .channel import ChannelParams, sample_transmission, sample_y
from .errors import ConfigError, NumericError
from .quantizer import Grid, build_grid, build_nested_pair, schedule
from .stats import empirical_cond_cdf

CONFIG_KEYS = (
    "h1", "h2", "h3", "n", "trials", "strategy",
    "n_x", "n_y", "n_u", "n_v", "range", "schedule",
    "seed", "quantile", "out",
)

STRATEGIES = ("honest", "attack1", "attack2", "map", "kernel")
_ARM_IDS = {name: i for i, name in enumerate(STRATEGIES)}


@dataclass
class ExperimentConfig:
    h1: float
    h2: float
    h3: float
    n: int
    trials: int
    strategy: str
    n_x: int
    n_y: int
    n_u: int
    n_v: int
    range: float
    schedule: bool
    seed: int
    quantile: float
    out: str
    # Callable payloads for the map/kernel strategies; only settable through
    # the library API, never from a config file.
    map_fn: Callable | None = field(default=None, compare=False, repr=False)
    kernel_sampler: Callable | None = field(default=None, compare=False, repr=False)

    @property
    def params(self) -> ChannelParams:
        return ChannelParams(self.h1, self.h2, self.h3)


@dataclass(frozen=True)
class GridSet:
    x: Grid
    y: Grid
    u: Grid
    v: Grid
    t_points: np.ndarray


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    honest: np.ndarray
    attack: np.ndarray | None
    policy: detector.DetectionPolicy
    honest_verdicts: np.ndarray
    attack_verdicts: np.ndarray | None
    ks: float | None


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    def fail(msg):
        raise ConfigError(msg)

    for key in ("h1", "h2", "h3", "range", "quantile"):
        if not np.isfinite(getattr(config, key)):
            fail(f"config key {key!r} must be finite")
    if config.n < 1:
        fail(f"config key 'n' must be a positive block length, got {config.n}")
    if config.trials < 1:
        fail(f"config key 'trials' must be positive, got {config.trials}")
    if config.seed < 0:
        fail(f"config key 'seed' must be non-negative, got {config.seed}")
    if config.strategy not in STRATEGIES:
        fail(f"config key 'strategy' must be one of {'|'.join(STRATEGIES)}, got {config.strategy!r}")
    if not 0.0 < config.quantile < 1.0:
        fail(f"config key 'quantile' must lie in (0, 1), got {config.quantile}")
    if config.range <= 0:
        fail(f"config key 'range' must be positive, got {config.range}")
    for key in ("n_x", "n_y", "n_u", "n_v"):
        if getattr(config, key) < 3:
            fail(f"config key {key!r} must be at least 3, got {getattr(config, key)}")
    if not config.schedule and (config.n_u - 2) % (config.n_v - 2) != 0:
        fail(
            "interior fine bins must tile interior coarse bins exactly: "
            f"n_u-2={config.n_u - 2} is not a multiple of n_v-2={config.n_v - 2}"
        )
    return config


def grids_for(config: ExperimentConfig) -> GridSet:
    """Build the four grids and decision thresholds a configuration implies."""
    if config.schedule:
        sched = schedule(config.n)
        return GridSet(x=sched.x, y=sched.y, u=sched.u, v=sched.v,
                       t_points=sched.y.inner_edges)
    r = config.range
    x = build_grid(-r, r, config.n_x)
    y = build_grid(-r, r, config.n_y)
    pair = build_nested_pair(r, config.n_v, (config.n_u - 2) // (config.n_v - 2))
    return GridSet(x=x, y=y, u=pair.fine, v=pair.coarse, t_points=y.inner_edges)


def grid_summary(config: ExperimentConfig) -> dict:
    if config.schedule:
        return {"schedule": "on", "n": config.n}
    return {
        "range": config.range,
        "n_x": config.n_x, "n_y": config.n_y,
        "n_u": config.n_u, "n_v": config.n_v,
    }


def make_strategy(config: ExperimentConfig) -> relay.RelayStrategy:
    if config.strategy == "honest":
        return relay.Honest()
    if config.strategy == "attack1":
        return relay.AlternatingShift()
    if config.strategy == "attack2":
        return relay.MarginalMimic()
    if config.strategy == "map":
        if config.map_fn is None:
            raise ConfigError("strategy 'map' needs config.map_fn set through the library API")
        return relay.DeterministicMap(config.map_fn)
    if config.strategy == "kernel":
        if config.kernel_sampler is None:
            raise ConfigError("strategy 'kernel' needs config.kernel_sampler set through the library API")
        return relay.IidKernel(config.kernel_sampler)
    raise ConfigError(f"unknown strategy {config.strategy!r}")


@lru_cache(maxsize=32)
def _reference_cached(h1, h2, h3, alpha, beta, bins, t_key) -> detector.ReferenceTable:
    grid = Grid(alpha=alpha, beta=beta, bin_count=bins)
    return detector.reference_table(ChannelParams(h1, h2, h3), grid, np.array(t_key))


def reference_for(config: ExperimentConfig, grids: GridSet | None = None) -> detector.ReferenceTable:
    grids = grids or grids_for(config)
    return _reference_cached(
        config.h1, config.h2, config.h3,
        grids.x.alpha, grids.x.beta, grids.x.bin_count,
        tuple(float(t) for t in grids.t_points),
    )


def trial_rng(config: ExperimentConfig, trial_index: int) -> np.random.Generator:
    key = (config.seed, _ARM_IDS[config.strategy], trial_index)
    return np.random.default_rng(np.random.SeedSequence(key))


def run_trial(config: ExperimentConfig, trial_index: int) -> float:
    """One Monte Carlo trial: returns the decision statistic for the configured arm."""
    if trial_index < 0:
        raise ValueError(f"trial index must be non-negative, got {trial_index}")
    grids = grids_for(config)
    reference = reference_for(config, grids)
    rng = trial_rng(config, trial_index)
    params = config.params
    block = sample_transmission(config.n, params, rng)
    v = relay.apply_strategy(block.u, make_strategy(config), params, rng)
    y = sample_y(v, params, rng)
    table = empirical_cond_cdf(y, grids.x.quantize(block.x), grids.t_points, grids.x.bin_count)
    return detector.decision_statistic(table, reference)


def _map_trials(config: ExperimentConfig, count: int, jobs: int) -> np.ndarray:
    if jobs <= 1 or config.strategy in ("map", "kernel"):
        values = [run_trial(config, i) for i in range(count)]
    else:
        # Trials are keyed by index, so scheduling order cannot change results.
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, count // (4 * jobs))
            values = list(pool.map(run_trial, [config] * count, range(count), chunksize=chunk))
    return np.asarray(values)


def honest_statistics(config: ExperimentConfig, count: int, jobs: int = 1) -> np.ndarray:
    """Decision statistics from honest-relay trials of the same configuration.

    Callable payloads are dropped so the honest arm stays picklable for worker
    processes even when the configured strategy carries one.
    """
    honest = replace(config, strategy="honest", map_fn=None, kernel_sampler=None)
    return _map_trials(honest, count, jobs)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run the calibration arm (plus an attack arm for dishonest strategies)."""
    validate_config(config)
    honest = honest_statistics(config, config.trials, jobs)
    policy = detector.policy_from_samples(
        honest, config.quantile,
        {"seed": config.seed, "n": config.n, "grids": grid_summary(config)},
    )
    honest_verdicts = np.array([detector.detect(d, policy).malicious for d in honest])
    attack = attack_verdicts = ks = None
    if config.strategy != "honest":
        attack = _map_trials(config, config.trials, jobs)
        attack_verdicts = np.array([detector.detect(d, policy).malicious for d in attack])
        ks = ks_distance(honest, attack)
    return ExperimentReport(
        config=config,
        honest=honest,
        attack=attack,
        policy=policy,
        honest_verdicts=honest_verdicts,
        attack_verdicts=attack_verdicts,
        ks=ks,
    )


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance (sup-norm gap of the empirical CDFs)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("KS distance needs two non-empty samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


# ---------------------------------------------------------------------------
# config file I/O (flat key = value, round-trippable)


def _parse_value(key: str, raw: str):
    try:
        if key in ("h1", "h2", "h3", "range", "quantile"):
            return float(raw)
        if key in ("n", "trials", "n_x", "n_y", "n_u", "n_v", "seed"):
            return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r} has a malformed value: {raw!r}") from None
    if key == "strategy":
        if raw not in STRATEGIES:
            raise ConfigError(f"config key 'strategy' must be one of {'|'.join(STRATEGIES)}, got {raw!r}")
        return raw
    if key == "schedule":
        if raw not in ("on", "off"):
            raise ConfigError(f"config key 'schedule' must be 'on' or 'off', got {raw!r}")
        return raw == "on"
    return raw  # out


def load_config(path) -> ExperimentConfig:
    """Parse a flat key = value config file; every key is required, none may repeat."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        entries[key] = _parse_value(key, value)
    missing = [k for k in CONFIG_KEYS if k not in entries]
    if missing:
        raise ConfigError("missing required config keys: " + ", ".join(missing))
    return validate_config(ExperimentConfig(**entries))


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(config, key)
        if key == "schedule":
            value = "on" if value else "off"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir=None, figures: bool = True) -> list[Path]:
    """Write the delimited outputs (and a rendered figure) for one experiment.

    trials.csv   one row per trial and arm: arm,trial,seed,d_n,verdict
    curves.csv   the empirical CDF of the statistic per arm: arm,d_n_value,ecdf
    summary.txt  threshold / quantile / KS gap
    config.txt   round-trippable echo of the configuration
    cdf.png      the curves.csv content, rendered (skipped with figures=False)
    """
    out = Path(out_dir if out_dir is not None else report.config.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    arms = [("honest", report.honest, report.honest_verdicts)]
    if report.attack is not None:
        arms.append((report.config.strategy, report.attack, report.attack_verdicts))

    trials_path = out / "trials.csv"
    with trials_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "trial", "seed", "d_n", "verdict"])
        for arm_name, values, verdicts in arms:
            for i, (d, bad) in enumerate(zip(values, verdicts)):
                writer.writerow([arm_name, i, report.config.seed, f"{d:.17g}",
                                 "malicious" if bad else "honest"])
    written.append(trials_path)

    curves_path = out / "curves.csv"
    with curves_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "d_n_value", "ecdf"])
        for arm_name, values, _ in arms:
            order = np.sort(values)
            for i, d in enumerate(order):
                writer.writerow([arm_name, f"{d:.17g}", f"{(i + 1) / order.size:.17g}"])
    written.append(curves_path)

    summary_path = out / "summary.txt"
    ks_text = "" if report.ks is None else f"ks = {report.ks:.17g}\n"
    summary_path.write_text(
        f"threshold = {report.policy.threshold:.17g}\n"
        f"quantile = {report.config.quantile!r}\n" + ks_text
    )
    written.append(summary_path)

    config_path = out / "config.txt"
    config_path.write_text(format_config(report.config))
    written.append(config_path)

    if figures:
        from . import plots

        fig_path = out / "cdf.png"
        plots.save(plots.ecdf_figure(report), fig_path)
        written.append(fig_path)
    return written


# ---------------------------------------------------------------------------
# figure presets: pinned channel/strategy settings with grids sized so every
# direct-link bin stays populated at the preset block lengths


@dataclass(frozen=True)
class FigurePreset:
    name: str
    description: str
    h1: float
    h2: float
    h3: float
    strategy: str
    n_values: tuple[int, ...]
    trials: tuple[int, ...]
    n_x: int
    n_y: int
    n_u: int
    n_v: int
    range: float
    seed: int
    quantile: float = 0.99

    def config_for(self, n: int, trials: int | None = None, seed: int | None = None,
                   out: str = "") -> ExperimentConfig:
        if n not in self.n_values:
            raise ConfigError(f"preset {self.name} has no block length {n}")
        idx = self.n_values.index(n)
        return validate_config(ExperimentConfig(
            h1=self.h1, h2=self.h2, h3=self.h3,
            n=n, trials=self.trials[idx] if trials is None else trials,
            strategy=self.strategy,
            n_x=self.n_x, n_y=self.n_y, n_u=self.n_u, n_v=self.n_v,
            range=self.range, schedule=False,
            seed=self.seed if seed is None else seed,
            quantile=self.quantile, out=out,
        ))


FIGURE_PRESETS = {
    "4": FigurePreset(
        name="4", description="deterministic tampering vs honest relay, unit gains",
        h1=1.0, h2=1.0, h3=1.0, strategy="attack1",
        n_values=(100, 1_000, 10_000), trials=(200, 200, 200),
        n_x=14, n_y=14, n_u=26, n_v=14, range=3.0, seed=11,
    ),
    "5": FigurePreset(
        name="5", description="marginal-mimicking relay vs honest relay, unit gains",
        h1=1.0, h2=1.0, h3=1.0, strategy="attack2",
        n_values=(100, 1_000, 10_000), trials=(200, 200, 200),
        n_x=14, n_y=14, n_u=26, n_v=14, range=3.0, seed=12,
    ),
    "6": FigurePreset(
        name="6", description="marginal-mimicking relay with a weak direct link",
        h1=1.0, h2=1.0, h3=0.01, strategy="attack2",
        n_values=(100, 1_000, 10_000, 100_000), trials=(200, 200, 200, 50),
        n_x=10, n_y=42, n_u=42, n_v=22, range=2.5, seed=13,
    ),
    "7": FigurePreset(
        name="7", description="marginal-mimicking relay with no direct link",
        h1=1.0, h2=1.0, h3=0.0, strategy="attack2",
        n_values=(100, 1_000, 10_000), trials=(200, 200, 200),
        n_x=10, n_y=42, n_u=42, n_v=22, range=2.5, seed=14,
    ),
}


def reproduce_figure(key: str, out_dir=None, seed: int | None = None,
                     trials: int | None = None, jobs: int = 1,
                     figures: bool = True) -> list[tuple[int, ExperimentReport]]:
    """Run a preset's block-length sweep, emitting per-n reports plus a summary."""
    if key not in FIGURE_PRESETS:
        raise ConfigError(f"unknown figure preset {key!r}; choose from {sorted(FIGURE_PRESETS)}")
    preset = FIGURE_PRESETS[key]
    out = Path(out_dir if out_dir is not None else f"runs/figure{key}")
    results = []
    for n in preset.n_values:
        config = preset.config_for(n, trials=trials, seed=seed, out=str(out / f"n_{n}"))
        report = run_experiment(config, jobs=jobs)
        emit_report(report, figures=figures)
        results.append((n, report))

    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.csv"
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "arm", "trials", "d_n_q05", "d_n_median", "d_n_q95",
                         "flagged_fraction", "threshold", "ks"])
        for n, report in results:
            rows = [("honest", report.honest, report.honest_verdicts)]
            if report.attack is not None:
                rows.append((report.config.strategy, report.attack, report.attack_verdicts))
            for arm_name, values, verdicts in rows:
                q05, q50, q95 = np.quantile(values, [0.05, 0.5, 0.95])
                writer.writerow([
                    n, arm_name, values.size,
                    f"{q05:.17g}", f"{q50:.17g}", f"{q95:.17g}",
                    f"{verdicts.mean():.17g}",
                    f"{report.policy.threshold:.17g}",
                    "" if report.ks is None else f"{report.ks:.17g}",
                ])

    if figures:
        from . import plots

        plots.save(plots.sweep_figure(preset, results), out / "figure.png")
    return results
