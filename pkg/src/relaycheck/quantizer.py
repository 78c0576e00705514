"""Scalar quantization grids with unbounded tail bins, nesting, and size schedules.

A grid over [alpha, beta] with `bins` cells is the partition

    bin 0        = (-inf, alpha]
    bin j        = (r[j-1], r[j]]      for 0 < j < bins-1   (right-closed)
    bin bins-1   = (beta, +inf)

where r[0..bins-2] = alpha, alpha+step, ..., beta are uniformly spaced with
step = (beta - alpha) / (bins - 2), and each bin's representative is r[j]
(the upper tail reuses beta + step).  Two grids over the same interval whose
inner cells align (fine step an integer divisor of the coarse step) form a
nested pair; the nesting matrix maps each fine bin to the unique coarse bin
containing it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    alpha: float
    beta: float
    bin_count: int

    @property
    def step(self) -> float:
        return (self.beta - self.alpha) / (self.bin_count - 2)

    @cached_property
    def inner_edges(self) -> np.ndarray:
        """The bin_count-1 finite cell boundaries alpha..beta (also the first representatives)."""
        return np.linspace(self.alpha, self.beta, self.bin_count - 1)

    @cached_property
    def representatives(self) -> np.ndarray:
        """One representative per bin; the open upper tail gets beta + step."""
        return np.concatenate([self.inner_edges, [self.beta + self.step]])

    def quantize(self, values):
        """Map values to 0-based bin indices; scalar in, scalar out.

        Right edges are inclusive, so searchsorted with ties-to-the-left puts
        a value sitting exactly on an edge into the bin below it.
        """
        arr = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("cannot quantize non-finite values")
        idx = np.searchsorted(self.inner_edges, arr, side="left")
        return int(idx) if np.isscalar(values) or arr.ndim == 0 else idx

    def bin_interval(self, j: int) -> tuple[float, float]:
        """The half-open interval (lo, hi] of bin j, with infinite tails."""
        if not 0 <= j < self.bin_count:
            raise ValueError(f"bin index {j} out of range for {self.bin_count} bins")
        edges = self.inner_edges
        lo = -np.inf if j == 0 else edges[j - 1]
        hi = np.inf if j == self.bin_count - 1 else edges[j]
        return float(lo), float(hi)


@dataclass(frozen=True)
class NestedGridPair:
    fine: Grid
    coarse: Grid
    refinement: int


@dataclass(frozen=True)
class GridSchedule:
    """Grid parameters derived from a sample size by repeated fourth-root shrinkage."""

    u: Grid
    v: Grid
    y: Grid
    x: Grid


def build_grid(alpha: float, beta: float, bin_count: int) -> Grid:
    if not (np.isfinite(alpha) and np.isfinite(beta)) or alpha >= beta:
        raise ValueError(f"grid needs finite alpha < beta, got [{alpha}, {beta}]")
    if bin_count < 3:
        raise ValueError(f"grid needs at least 3 bins (two tails plus an interior), got {bin_count}")
    return Grid(alpha=float(alpha), beta=float(beta), bin_count=int(bin_count))


def quantize(values, grid: Grid):
    return grid.quantize(values)


def build_nested_pair(half_range: float, coarse_bins: int, refinement: int) -> NestedGridPair:
    """Build aligned coarse/fine grids over [-half_range, half_range].

    The fine grid splits every interior coarse cell into `refinement` equal
    cells and keeps the same tails, so fine bins never straddle coarse edges.
    """
    if refinement < 1:
        raise ValueError(f"refinement must be a positive integer, got {refinement}")
    coarse = build_grid(-half_range, half_range, coarse_bins)
    fine = build_grid(-half_range, half_range, (coarse_bins - 2) * refinement + 2)
    return NestedGridPair(fine=fine, coarse=coarse, refinement=int(refinement))


def nesting_matrix(pair: NestedGridPair) -> np.ndarray:
    """One-hot matrix W0 with W0[i, j] = 1 iff fine bin i lies inside coarse bin j.

    Raises if any fine bin straddles a coarse boundary (the pair is not
    actually nested).
    """
    fine, coarse = pair.fine, pair.coarse
    w0 = np.zeros((fine.bin_count, coarse.bin_count), dtype=int)
    tol = 1e-9 * max(1.0, abs(fine.alpha), abs(fine.beta))
    for i in range(fine.bin_count):
        lo, hi = fine.bin_interval(i)
        if np.isinf(lo):
            probe = hi
        elif np.isinf(hi):
            probe = lo + 1.0
        else:
            probe = 0.5 * (lo + hi)
        j = coarse.quantize(probe)
        clo, chi = coarse.bin_interval(j)
        if lo < clo - tol or hi > chi + tol:
            raise ValueError(
                f"fine bin {i} spans ({lo}, {hi}] which straddles coarse bin boundaries"
            )
        w0[i, j] = 1
    return w0


def schedule(n_prime: int) -> GridSchedule:
    """Derive all four grid parameter sets from the relay-observation sample size.

    The forwarded-value grid gets n' bins over +/-sqrt(n'); each later stage
    uses the fourth root of the previous stage's bin count, with the direct
    link mirroring the relayed link.  Any stage collapsing below 3 bins means
    the sample size is too small to support the construction.
    """
    if n_prime < 3:
        raise ValueError(f"sample size must be at least 3, got {n_prime}")
    n_v = int(round(n_prime ** 0.25))
    n_y = int(round(n_v ** 0.25))
    for name, count in (("forwarded-value", n_v), ("relayed-output", n_y)):
        if count < 3:
            raise ValueError(
                f"schedule collapses to {count} {name} bins; sample size {n_prime} is too small"
            )
    beta1 = float(np.sqrt(n_prime))
    beta2 = float(np.sqrt(n_v))
    beta3 = float(np.sqrt(n_y))
    y = build_grid(-beta3, beta3, n_y)
    return GridSchedule(
        u=build_grid(-beta1, beta1, n_prime),
        v=build_grid(-beta2, beta2, n_v),
        y=y,
        x=y,
    )
