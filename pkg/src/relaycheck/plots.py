"""Rendering of experiment reports to PNG files (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_ARM_COLORS = {"honest": "#2c7fb8", "attack1": "#d95f02", "attack2": "#d95f02",
               "map": "#7570b3", "kernel": "#7570b3"}


def _ecdf_steps(values):
    xs = np.sort(np.asarray(values, dtype=float))
    ys = np.arange(1, xs.size + 1) / xs.size
    return xs, ys


def _draw_arms(ax, report):
    arms = [("honest", report.honest)]
    if report.attack is not None:
        arms.append((report.config.strategy, report.attack))
    for name, values in arms:
        xs, ys = _ecdf_steps(values)
        ax.step(xs, ys, where="post", label=name,
                color=_ARM_COLORS.get(name, "#333333"), lw=1.6)
    ax.axvline(report.policy.threshold, color="#888888", ls="--", lw=1.0,
               label=f"threshold ({report.config.quantile:g})")
    ax.set_xlabel("decision statistic")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)


def ecdf_figure(report):
    """Empirical CDFs of the decision statistic for each arm, with the threshold."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    _draw_arms(ax, report)
    ax.set_ylabel("empirical CDF")
    ax.set_title(f"n = {report.config.n}, strategy = {report.config.strategy}", fontsize=10)
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    return fig


def sweep_figure(preset, results):
    """One panel per block length of a preset sweep."""
    fig, axes = plt.subplots(
        1, len(results), figsize=(3.4 * len(results), 3.2), sharey=True, squeeze=False
    )
    for ax, (n, report) in zip(axes[0], results):
        _draw_arms(ax, report)
        ax.set_title(f"n = {n}", fontsize=10)
    axes[0][0].set_ylabel("empirical CDF")
    axes[0][-1].legend(fontsize=8, loc="lower right")
    fig.suptitle(preset.description, fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.93))
    return fig


def save(fig, path):
    fig.savefig(path, dpi=150)
    plt.close(fig)
