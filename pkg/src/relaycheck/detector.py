"""Destination-side detection: analytic reference, decision statistic, calibration,
and the manipulability analysis for candidate relay strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .channel import ChannelParams, norm_cdf, norm_pdf, pdf_u_given_x, pdf_u_marginal
from .errors import NumericError
from .quantizer import Grid
from .stats import EmpiricalCdfTable, p_u_bin_given_x_bin, x_bin_posterior

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_QUAD_OPTS = dict(epsabs=1e-10, epsrel=1e-10, limit=200)


@dataclass(frozen=True)
class ReferenceTable:
    """Analytic conditional CDF of the relayed output given the direct-link bin,
    under an honest relay, tabulated at the decision thresholds."""

    values: np.ndarray  # (len(t_points), x_grid.bin_count)
    t_points: np.ndarray
    x_grid: Grid


@dataclass
class DetectionPolicy:
    threshold: float
    calibration: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DetectionOutcome:
    statistic: float
    threshold: float
    malicious: bool


@dataclass(frozen=True)
class TransitionKernel:
    """A candidate relay forwarding law: density pdf(v, u) of V given U=u,
    with support(u) giving finite integration bounds for v."""

    pdf: Callable[[float, float], float]
    support: Callable[[float], tuple[float, float]]
    label: str = "custom"


@dataclass(frozen=True)
class ManipulabilityReport:
    max_gap: float
    manipulable_at_tol: bool
    tol: float
    gaps: np.ndarray  # (len(probe_x), len(probe_y))
    probe_x: np.ndarray
    probe_y: np.ndarray


def _check_t_points(t_points: np.ndarray) -> np.ndarray:
    t = np.asarray(t_points, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("t_points must be a strictly increasing array with at least 2 entries")
    return t


def reference_table(params: ChannelParams, x_grid: Grid, t_points) -> ReferenceTable:
    """Tabulate the honest conditional law by adaptive quadrature.

    Entry (m, k) integrates the bin-conditional relay-observation density
    (a two-Gaussian mixture weighted by the bin posterior) against the
    relay->destination hop CDF:

        int f(u | X-bin k) * Phi(t_m - h2 * u) du
    """
    t = _check_t_points(t_points)
    p_plus, p_minus = x_bin_posterior(x_grid, params)
    h1, h2 = params.h1, params.h2
    values = np.empty((t.size, x_grid.bin_count))
    for k in range(x_grid.bin_count):
        wp, wm = p_plus[k], p_minus[k]
        for m, tm in enumerate(t):
            def integrand(u):
                mix = wp * math.exp(-0.5 * (u - h1) ** 2) + wm * math.exp(-0.5 * (u + h1) ** 2)
                return mix / _SQRT_2PI * 0.5 * math.erfc(-(tm - h2 * u) / math.sqrt(2.0))

            val, err = quad(integrand, -np.inf, np.inf, **_QUAD_OPTS)
            if not np.isfinite(val) or err > 1e-6:
                raise NumericError(f"reference quadrature failed at cell ({m}, {k})")
            values[m, k] = val
    return ReferenceTable(values=values, t_points=t, x_grid=x_grid)


def decision_statistic(cdf_table: EmpiricalCdfTable, reference: ReferenceTable) -> float:
    """Averaged absolute gap between the empirical table and the reference.

    Sums |empirical - reference| over every threshold and every direct-link
    bin except the upper tail, normalized by (n_x - 2) * (n_t - 1); an
    empirical table that matches the reference exactly scores 0.
    """
    if cdf_table.values.shape != reference.values.shape:
        raise ValueError("empirical and reference tables differ in shape")
    if cdf_table.t_points.shape != reference.t_points.shape or not np.allclose(
        cdf_table.t_points, reference.t_points, rtol=0.0, atol=1e-12
    ):
        raise ValueError("empirical and reference tables use different thresholds")
    n_t, n_x = reference.values.shape
    if n_x < 3 or n_t < 2:
        raise ValueError("need at least 3 X-bins and 2 thresholds")
    gap = np.abs(cdf_table.values[:, : n_x - 1] - reference.values[:, : n_x - 1])
    return float(gap.sum() / ((n_x - 2) * (n_t - 1)))


def policy_from_samples(samples, quantile: float, calibration: dict | None = None) -> DetectionPolicy:
    """Set the threshold at an empirical quantile of honest-relay statistics."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 20:
        raise ValueError(f"need at least 20 honest trials to calibrate, got {samples.size}")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must lie strictly inside (0, 1), got {quantile}")
    if not np.all(np.isfinite(samples)):
        raise NumericError("honest calibration samples contain non-finite values")
    meta = dict(calibration or {})
    meta.update(honest_trials=int(samples.size), quantile=float(quantile))
    return DetectionPolicy(threshold=float(np.quantile(samples, quantile)), calibration=meta)


def calibrate_threshold(config, honest_trials: int | None = None, quantile: float | None = None,
                        jobs: int = 1) -> DetectionPolicy:
    """Run honest-relay Monte Carlo trials under `config` and set the threshold
    at the requested empirical quantile of their decision statistics."""
    from . import harness  # deferred: the harness drives trials with this module's statistic

    count = config.trials if honest_trials is None else int(honest_trials)
    q = config.quantile if quantile is None else float(quantile)
    samples = harness.honest_statistics(config, count, jobs=jobs)
    meta = dict(seed=config.seed, n=config.n, grids=harness.grid_summary(config))
    return policy_from_samples(samples, q, meta)


def detect(statistic: float, policy: DetectionPolicy) -> DetectionOutcome:
    """Compare a decision statistic against the calibrated threshold (ties stay honest)."""
    statistic = float(statistic)
    if not np.isfinite(statistic):
        raise NumericError(f"decision statistic is not finite: {statistic}")
    if statistic < 0:
        raise ValueError(f"decision statistic cannot be negative, got {statistic}")
    return DetectionOutcome(
        statistic=statistic,
        threshold=policy.threshold,
        malicious=statistic > policy.threshold,
    )


# ---------------------------------------------------------------------------
# candidate-strategy kernels and the manipulability probe


def marginal_mimic_kernel(params: ChannelParams) -> TransitionKernel:
    """Forwarding law that ignores u and draws from the honest marginal."""
    reach = abs(params.h1) + 12.0

    return TransitionKernel(
        pdf=lambda v, u: float(pdf_u_marginal(v, params)),
        support=lambda u: (-reach, reach),
        label="marginal",
    )


def near_identity_kernel(width: float) -> TransitionKernel:
    """Gaussian blur of the honest relay with standard deviation `width`."""
    if width <= 0:
        raise ValueError(f"kernel width must be positive, got {width}")
    inv = 1.0 / width

    return TransitionKernel(
        pdf=lambda v, u: math.exp(-0.5 * ((v - u) * inv) ** 2) * inv / _SQRT_2PI,
        support=lambda u: (u - 13.0 * width, u + 13.0 * width),
        label=f"identity~{width:g}",
    )


def check_manipulable(
    params: ChannelParams,
    kernel: TransitionKernel,
    probe_x=None,
    probe_y=None,
    tol: float = 1e-7,
) -> ManipulabilityReport:
    """Probe whether a forwarding law is statistically invisible to the detector.

    For each probe pair (x, y) compares the destination's predicted conditional
    CDF under the kernel with the honest one:

        gap(x, y) = | int f(u|x) [ int psi(v|u) Phi(y - h2 v) dv ] du
                      - int f(u|x) Phi(y - h2 u) du |

    and reports the maximum.  A kernel is manipulable at tolerance `tol` when
    that maximum stays below it.  Kernels must integrate to 1 in v (checked at
    a few u values before any probing).
    """
    xs = np.linspace(-2.0, 2.0, 5) if probe_x is None else np.asarray(probe_x, dtype=float)
    ys = np.linspace(-2.0, 2.0, 5) if probe_y is None else np.asarray(probe_y, dtype=float)
    if xs.size == 0 or ys.size == 0:
        raise ValueError("probe grids must be non-empty")

    reach = abs(params.h1) + 3.0
    for u0 in (-reach, -1.0, 0.0, 1.0, reach):
        lo, hi = kernel.support(u0)
        mass, _ = quad(lambda v: kernel.pdf(v, u0), lo, hi, **_QUAD_OPTS)
        if abs(mass - 1.0) > 1e-4:
            raise ValueError(
                f"kernel does not normalize: integrates to {mass:.6f} at u={u0:g}"
            )

    h2 = params.h2
    u_lim = abs(params.h1) + 12.0
    gaps = np.empty((xs.size, ys.size))

    def hop(t):
        return 0.5 * math.erfc(-t / math.sqrt(2.0))

    for a, x in enumerate(xs):
        fx = lambda u: float(pdf_u_given_x(u, x, params))
        for b, y in enumerate(ys):
            def pushed(u):
                lo, hi = kernel.support(u)
                inner, _ = quad(lambda v: kernel.pdf(v, u) * hop(y - h2 * v), lo, hi,
                                epsabs=1e-10, epsrel=1e-10, limit=200)
                return fx(u) * inner

            lhs, el = quad(pushed, -u_lim, u_lim, points=[-params.h1, params.h1],
                           epsabs=1e-9, epsrel=1e-9, limit=400)
            rhs, er = quad(lambda u: fx(u) * hop(y - h2 * u), -u_lim, u_lim,
                           points=[-params.h1, params.h1], **_QUAD_OPTS)
            if not (np.isfinite(lhs) and np.isfinite(rhs)) or max(el, er) > 1e-6:
                raise NumericError(f"manipulability quadrature failed at probe ({x:g}, {y:g})")
            gaps[a, b] = abs(lhs - rhs)

    max_gap = float(gaps.max())
    return ManipulabilityReport(
        max_gap=max_gap,
        manipulable_at_tol=max_gap < tol,
        tol=float(tol),
        gaps=gaps,
        probe_x=xs,
        probe_y=ys,
    )


# ---------------------------------------------------------------------------
# the convex objective over bin-transition strategies


def lift_nesting(w0: np.ndarray, n_x: int) -> np.ndarray:
    """Broadcast a (fine, coarse) transition matrix to one slice per X-bin."""
    w0 = np.asarray(w0, dtype=float)
    return np.repeat(w0[:, :, None], n_x, axis=2)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _panel_nodes(lo: float, hi: float, max_width: float = 0.5):
    """Gauss-Legendre nodes/weights tiling [lo, hi] with short panels."""
    n_panels = max(1, int(math.ceil((hi - lo) / max_width)))
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def manipulation_objective(
    w: np.ndarray,
    u_grid: Grid,
    v_grid: Grid,
    x_grid: Grid,
    t_points,
    params: ChannelParams,
) -> float:
    """Squared-gap objective over per-X-bin transition strategies.

    `w` has shape (u_bins, v_bins, x_bins); slice k prescribes how relay
    observations quantized on the fine grid are redistributed over the
    forwarded-value grid when the direct link landed in bin k.  Every slice
    must be row-stochastic.  The objective compares, cell by cell, the honest
    conditional CDF with the one induced by `w`, where each forwarded-value
    bin is represented by its probability-weighted honest hop CDF.  The
    nesting lift of an aligned pair attains exactly 0, and the objective is
    convex in `w` (it is a sum of squares of affine functions of `w`).
    """
    t = _check_t_points(t_points)
    w = np.asarray(w, dtype=float)
    n_u, n_v, n_x = u_grid.bin_count, v_grid.bin_count, x_grid.bin_count
    if w.shape != (n_u, n_v, n_x):
        raise ValueError(f"strategy tensor must have shape {(n_u, n_v, n_x)}, got {w.shape}")
    if np.any(w < -1e-12) or np.any(w > 1.0 + 1e-12):
        raise ValueError("strategy entries must lie in [0, 1]")
    row_sums = w.sum(axis=1)
    bad = np.argwhere(np.abs(row_sums - 1.0) > 1e-8)
    if bad.size:
        i, k = bad[0]
        raise ValueError(
            f"strategy slice {k} is not row-stochastic: row {i} sums to {row_sums[i, k]!r}"
        )

    h1, h2 = params.h1, params.h2
    p_plus, p_minus = x_bin_posterior(x_grid, params)
    p_fine = p_u_bin_given_x_bin(u_grid, x_grid, params)  # (n_u, n_x)

    # Per coarse-bin integrals of phi(u -/+ h1) * Phi(t - h2 u), tails clipped
    # where the mixture carries no mass.
    u_lim = abs(h1) + 12.0
    a_plus = np.zeros((t.size, n_v))
    a_minus = np.zeros((t.size, n_v))
    for j in range(n_v):
        lo, hi = v_grid.bin_interval(j)
        lo, hi = max(lo, -u_lim), min(hi, u_lim)
        if lo >= hi:
            continue
        nodes, wts = _panel_nodes(lo, hi)
        hop = norm_cdf(t[:, None] - h2 * nodes[None, :])  # (T, N)
        a_plus[:, j] = hop @ (norm_pdf(nodes - h1) * wts)
        a_minus[:, j] = hop @ (norm_pdf(nodes + h1) * wts)

    num = a_plus[:, :, None] * p_plus[None, None, :] + a_minus[:, :, None] * p_minus[None, None, :]
    ref = num.sum(axis=1)  # (T, n_x): the full honest integral, tiled exactly

    edges = np.concatenate([[-np.inf], v_grid.inner_edges, [np.inf]])
    d_plus = np.diff(norm_cdf(edges - h1))
    d_minus = np.diff(norm_cdf(edges + h1))
    den = d_plus[:, None] * p_plus[None, :] + d_minus[:, None] * p_minus[None, :]  # (n_v, n_x)

    fbar = np.empty((t.size, n_v, n_x))
    ok = den > 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        fbar = num / den[None, :, :]
    if not ok.all():
        fallback = norm_cdf(t[:, None] - h2 * v_grid.representatives[None, :])  # (T, n_v)
        fbar = np.where(ok[None, :, :], fbar, fallback[:, :, None])

    mix = np.einsum("ik,ijk->jk", p_fine, w)  # (n_v, n_x)
    induced = np.einsum("jk,tjk->tk", mix, fbar)  # (T, n_x)

    gap = ref[:, : n_x - 1] - induced[:, : n_x - 1]
    pref = ((x_grid.beta - x_grid.alpha) / (n_x - 2)) * ((t[-1] - t[0]) / (t.size - 1))
    return float(pref * np.sum(gap * gap))
