"""Relay forwarding strategies and the quantized attack-magnitude score.

An honest relay forwards its observation unchanged.  Byzantine strategies
either transform the observations deterministically or replace them with
draws that mimic the honest marginal while destroying the correlation the
destination expects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import ChannelParams, sample_u_marginal
from .quantizer import NestedGridPair, nesting_matrix
from .stats import empirical_transition


@dataclass(frozen=True)
class Honest:
    """Forward the observation unchanged."""


@dataclass(frozen=True)
class AlternatingShift:
    """Deterministic per-index tampering: subtract 1 at odd positions (1-based),
    double-and-subtract-1 at even positions."""


@dataclass(frozen=True)
class MarginalMimic:
    """Discard the observations and forward iid draws from the honest marginal."""


@dataclass(frozen=True)
class DeterministicMap:
    """Forward f(u) elementwise for a caller-supplied vectorized map."""

    fn: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IidKernel:
    """Forward draws from a caller-supplied sampler v_i ~ sampler(u_i, rng)."""

    sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]


RelayStrategy = Honest | AlternatingShift | MarginalMimic | DeterministicMap | IidKernel


def apply_strategy(
    u: np.ndarray,
    strategy: RelayStrategy,
    params: ChannelParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Produce the forwarded block v from the relay's observation block u."""
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        raise ValueError("cannot apply a relay strategy to an empty observation block")
    if isinstance(strategy, Honest):
        return u.copy()
    if isinstance(strategy, AlternatingShift):
        v = np.empty_like(u)
        v[0::2] = u[0::2] - 1.0  # odd positions, counting from 1
        v[1::2] = 2.0 * u[1::2] - 1.0
        return v
    if isinstance(strategy, MarginalMimic):
        return sample_u_marginal(u.size, params, rng)
    if isinstance(strategy, DeterministicMap):
        v = np.asarray(strategy.fn(u), dtype=float)
        if v.shape != u.shape:
            raise ValueError("deterministic map changed the block shape")
        return v
    if isinstance(strategy, IidKernel):
        v = np.asarray(strategy.sampler(u, rng), dtype=float)
        if v.shape != u.shape:
            raise ValueError("kernel sampler changed the block shape")
        return v
    raise TypeError(f"unknown relay strategy: {strategy!r}")


@dataclass(frozen=True)
class AttackMagnitude:
    value: float
    observed_rows: int
    mode: str


def attack_magnitude(
    u: np.ndarray,
    v: np.ndarray,
    pair: NestedGridPair,
    mode: str = "observed-rows",
) -> AttackMagnitude:
    """Total deviation of the empirical bin-transition from the nested-grid identity.

    Quantizes u on the fine grid and v on the coarse grid, forms the row-wise
    empirical transition matrix, and sums |transition - one_hot_nesting| over
    entries.  With "observed-rows" (default) the sum runs only over fine bins
    that received at least one sample, so an honest relay scores exactly 0;
    "all-rows" also counts unobserved rows, each contributing its nesting row
    mass of 1.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"observation/forwarded blocks differ in length: {u.shape} vs {v.shape}")
    if mode not in ("observed-rows", "all-rows"):
        raise ValueError(f"unknown attack-magnitude mode: {mode!r}")
    transition = empirical_transition(
        pair.fine.quantize(u),
        pair.coarse.quantize(v),
        pair.fine.bin_count,
        pair.coarse.bin_count,
    )
    w0 = nesting_matrix(pair)
    gap = np.abs(transition.entries - w0)
    observed = transition.row_counts > 0
    if mode == "observed-rows":
        total = float(gap[observed].sum())
    else:
        total = float(gap[observed].sum() + w0[~observed].sum())
    return AttackMagnitude(value=total, observed_rows=int(observed.sum()), mode=mode)
