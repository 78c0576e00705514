"""Gaussian two-hop channel model with a secured direct link.

The source broadcasts an equiprobable bit S in {-1, +1}.  The relay observes
U = h1*S + N_r, the destination observes the direct signal X = h3*S + N_d and
the relayed signal Y = h2*V + N'_d, where V is whatever the relay chose to
forward and every noise term is independent standard normal.  Noise variances
are fixed at 1 throughout; only the gains (h1, h2, h3) are parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, expit

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ChannelParams:
    """Real channel gains for the three links (source->relay, relay->dest, source->dest)."""

    h1: float
    h2: float
    h3: float


@dataclass(frozen=True)
class TransmissionRecord:
    """One block of honest transmissions: the bits and both receive-side observations."""

    s: np.ndarray  # source bits, each -1.0 or +1.0
    u: np.ndarray  # relay observations h1*s + noise
    x: np.ndarray  # direct-link observations h3*s + noise


def norm_pdf(z):
    """Standard normal density, vectorized."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def norm_cdf(z):
    """Standard normal CDF via the complementary error function.

    erfc keeps full relative accuracy deep in the lower tail, so the absolute
    error is ~1 ulp everywhere (far below the 1e-14 the callers rely on).
    """
    z = np.asarray(z, dtype=float)
    return 0.5 * erfc(-z / np.sqrt(2.0))


def pdf_u_given_s(u, s, params: ChannelParams):
    """Density of the relay observation given the transmitted bit: N(h1*s, 1)."""
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    return norm_pdf(u - params.h1 * s)


def posterior_s_given_x(x, params: ChannelParams):
    """Posterior bit probabilities from a direct-link observation.

    Returns (p_plus, p_minus) with p_plus = 1 / (1 + exp(-2*h3*x)), the exact
    two-point Gaussian posterior under the equiprobable prior.
    """
    x = np.asarray(x, dtype=float)
    p_plus = expit(2.0 * params.h3 * x)
    return p_plus, 1.0 - p_plus


def pdf_u_given_x(u, x, params: ChannelParams):
    """Density of the relay observation given a direct-link observation.

    A two-component Gaussian mixture: the direct observation only carries
    information about the bit, so f(u|x) = sum_s P(s|x) * N(u; h1*s, 1).
    Broadcasts over u and x together.
    """
    u = np.asarray(u, dtype=float)
    p_plus, p_minus = posterior_s_given_x(x, params)
    return p_plus * norm_pdf(u - params.h1) + p_minus * norm_pdf(u + params.h1)


def pdf_u_marginal(u, params: ChannelParams):
    """Marginal density of the relay observation: an equal-weight two-Gaussian mixture."""
    u = np.asarray(u, dtype=float)
    return 0.5 * (norm_pdf(u - params.h1) + norm_pdf(u + params.h1))


def cdf_y_given_v(t, v, params: ChannelParams):
    """Conditional CDF of the relayed observation given the forwarded value: Phi(t - h2*v)."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    return norm_cdf(t - params.h2 * v)


def sample_transmission(n: int, params: ChannelParams, rng: np.random.Generator) -> TransmissionRecord:
    """Draw n honest transmissions: bits plus the relay and direct-link observations."""
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    s = rng.integers(0, 2, size=n) * 2.0 - 1.0
    u = params.h1 * s + rng.standard_normal(n)
    x = params.h3 * s + rng.standard_normal(n)
    return TransmissionRecord(s=s, u=u, x=x)


def sample_y(v, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Push forwarded values through the relay->destination hop: Y = h2*v + noise."""
    v = np.asarray(v, dtype=float)
    return params.h2 * v + rng.standard_normal(v.shape)


def sample_u_marginal(n: int, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Draw from the relay observation's marginal law (bits integrated out)."""
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    s = rng.integers(0, 2, size=n) * 2.0 - 1.0
    return params.h1 * s + rng.standard_normal(n)
