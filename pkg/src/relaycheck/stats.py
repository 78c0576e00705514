"""Empirical estimators on quantized blocks and their analytic counterparts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .channel import ChannelParams, cdf_y_given_v, norm_cdf, pdf_u_marginal, posterior_s_given_x
from .quantizer import Grid


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-normalized empirical transition counts between two bin labelings."""

    entries: np.ndarray  # (n_from, n_to), rows with samples sum to 1, others all 0
    row_counts: np.ndarray  # samples seen per source bin


@dataclass(frozen=True)
class EmpiricalCdfTable:
    """Per-X-bin empirical conditional CDF of y evaluated at fixed thresholds."""

    values: np.ndarray  # (len(t_points), n_x_bins)
    t_points: np.ndarray
    x_bin_counts: np.ndarray


def empirical_transition(
    from_bins: np.ndarray, to_bins: np.ndarray, n_from: int, n_to: int
) -> TransitionMatrix:
    """Empirical conditional frequency of landing in `to` bin given the `from` bin.

    Rows that received no samples stay identically zero rather than being
    imputed.
    """
    from_bins = np.asarray(from_bins)
    to_bins = np.asarray(to_bins)
    if from_bins.shape != to_bins.shape:
        raise ValueError("bin index arrays differ in length")
    if from_bins.size and (from_bins.min() < 0 or from_bins.max() >= n_from):
        raise ValueError("source bin index out of range")
    if to_bins.size and (to_bins.min() < 0 or to_bins.max() >= n_to):
        raise ValueError("target bin index out of range")
    counts = np.zeros((n_from, n_to))
    np.add.at(counts, (from_bins, to_bins), 1.0)
    row_counts = counts.sum(axis=1)
    entries = np.divide(
        counts, row_counts[:, None], out=np.zeros_like(counts), where=row_counts[:, None] > 0
    )
    return TransitionMatrix(entries=entries, row_counts=row_counts.astype(int))


def empirical_cond_cdf(
    y: np.ndarray, x_bins: np.ndarray, t_points: np.ndarray, n_x_bins: int
) -> EmpiricalCdfTable:
    """Empirical CDF of y at each threshold, conditioned on the X-bin label.

    Uses the strict convention  #{y_i < t} / #{bin k}; columns for empty
    X-bins are left at zero.
    """
    y = np.asarray(y, dtype=float)
    x_bins = np.asarray(x_bins)
    t_points = np.asarray(t_points, dtype=float)
    if y.shape != x_bins.shape:
        raise ValueError("y and x_bins differ in length")
    if t_points.ndim != 1 or t_points.size == 0 or np.any(np.diff(t_points) <= 0):
        raise ValueError("t_points must be a non-empty strictly increasing 1-D array")
    if x_bins.size and (x_bins.min() < 0 or x_bins.max() >= n_x_bins):
        raise ValueError("X bin index out of range")
    values = np.zeros((t_points.size, n_x_bins))
    counts = np.bincount(x_bins, minlength=n_x_bins)
    for k in np.flatnonzero(counts):
        ys = np.sort(y[x_bins == k])
        values[:, k] = np.searchsorted(ys, t_points, side="left") / counts[k]
    return EmpiricalCdfTable(values=values, t_points=t_points, x_bin_counts=counts)


def p_u_bin_given_x_bin(u_grid: Grid, x_grid: Grid, params: ChannelParams) -> np.ndarray:
    """Analytic P(relay-observation bin | direct-link bin) table, columns summing to 1.

    Conditioned on the transmitted bit the two observations are independent
    Gaussians, so every joint cell probability is a product of two normal-CDF
    differences, summed over the bit values with the equiprobable prior:

        P(U in Bj, X in Bk) = sum_s 1/2 * dPhi_u(j; h1 s) * dPhi_x(k; h3 s)

    including the unbounded tail cells.  Columns are normalized by the X-bin
    mass.
    """
    masses = {}
    for s in (1.0, -1.0):
        u_edges = np.concatenate([[-np.inf], u_grid.inner_edges, [np.inf]])
        x_edges = np.concatenate([[-np.inf], x_grid.inner_edges, [np.inf]])
        du = np.diff(norm_cdf(u_edges - params.h1 * s))
        dx = np.diff(norm_cdf(x_edges - params.h3 * s))
        masses[s] = (du, dx)
    joint = 0.5 * (np.outer(*masses[1.0]) + np.outer(*masses[-1.0]))
    col = joint.sum(axis=0)
    table = np.divide(joint, col[None, :], out=np.zeros_like(joint), where=col[None, :] > 0)
    for k in np.flatnonzero(col == 0):
        # X-bin mass underflowed; condition on the bit posterior at the
        # representative instead so the column still sums to 1.
        p_plus, p_minus = posterior_s_given_x(x_grid.representatives[k], params)
        table[:, k] = p_plus * masses[1.0][0] + p_minus * masses[-1.0][0]
    return table


def x_bin_posterior(x_grid: Grid, params: ChannelParams) -> tuple[np.ndarray, np.ndarray]:
    """Posterior bit probabilities conditioned on the direct-link bin.

    Returns (p_plus, p_minus) arrays over X-bins, each pair summing to 1;
    tail bins use exact normal-CDF differences.  Bins whose mass underflows
    fall back to the point posterior at the representative.
    """
    edges = np.concatenate([[-np.inf], x_grid.inner_edges, [np.inf]])
    mass_plus = 0.5 * np.diff(norm_cdf(edges - params.h3))
    mass_minus = 0.5 * np.diff(norm_cdf(edges + params.h3))
    total = mass_plus + mass_minus
    ok = total > 0
    p_plus = np.empty_like(total)
    p_plus[ok] = mass_plus[ok] / total[ok]
    if not ok.all():
        fallback, _ = posterior_s_given_x(x_grid.representatives[~ok], params)
        p_plus[~ok] = fallback
    return p_plus, 1.0 - p_plus


def bin_eval_points(grid: Grid, params: ChannelParams) -> np.ndarray:
    """Per-bin evaluation points for the forwarded-value grid.

    Interior bins use their representatives.  The unbounded tails use the
    conditional mean of the honest forwarded-signal marginal over the tail,
    computed by quadrature, so tail bins are not represented by points that
    carry no probability mass.
    """
    points = grid.representatives.astype(float).copy()
    f = lambda t: pdf_u_marginal(t, params)
    lo_mass, _ = quad(f, -np.inf, grid.alpha)
    hi_mass, _ = quad(f, grid.beta, np.inf)
    if lo_mass > 0:
        num, _ = quad(lambda t: t * f(t), -np.inf, grid.alpha)
        points[0] = num / lo_mass
    if hi_mass > 0:
        num, _ = quad(lambda t: t * f(t), grid.beta, np.inf)
        points[-1] = num / hi_mass
    return points


def hop_cdf_at_points(t_points: np.ndarray, v_points: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Relay->destination hop CDF evaluated on a (threshold, point) product grid."""
    t_points = np.asarray(t_points, dtype=float)
    v_points = np.asarray(v_points, dtype=float)
    return cdf_y_given_v(t_points[:, None], v_points[None, :], params)


def convergence_residual(
    cdf_table: EmpiricalCdfTable,
    p_u_given_x: np.ndarray,
    transition: TransitionMatrix,
    f_y_given_v_at_reps: np.ndarray,
) -> float:
    """Sup-norm gap between the empirical conditional CDF and its factored form.

    The factored form pushes the analytic bin-conditional law of the relay
    observation through the empirical bin transition and then through the
    relay->destination hop CDF tabulated at per-bin evaluation points
    (see bin_eval_points / hop_cdf_at_points):

        composed[t, k] = sum_j sum_l P(j|k) * T(l|j) * hop[t, l]
    """
    n_u, n_x = p_u_given_x.shape
    if transition.entries.shape[0] != n_u:
        raise ValueError("transition rows do not match the relay-observation grid")
    n_v = transition.entries.shape[1]
    if cdf_table.values.shape != (cdf_table.t_points.size, n_x):
        raise ValueError("cdf table shape is inconsistent")
    if f_y_given_v_at_reps.shape != (cdf_table.t_points.size, n_v):
        raise ValueError("hop CDF table must have shape (t_points, forwarded-value bins)")
    composed = f_y_given_v_at_reps @ transition.entries.T @ p_u_given_x  # (T, n_x)
    return float(np.max(np.abs(cdf_table.values - composed)))
