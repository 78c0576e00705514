"""Relay strategies and the attack-magnitude score."""

import numpy as np
import pytest
from scipy import stats as sps

from relaycheck import (
    AlternatingShift,
    ChannelParams,
    DeterministicMap,
    Honest,
    IidKernel,
    MarginalMimic,
    apply_strategy,
    attack_magnitude,
    build_nested_pair,
    sample_transmission,
    sample_u_marginal,
)

UNIT = ChannelParams(1.0, 1.0, 1.0)


def test_honest_forwards_unchanged():
    u = np.array([0.3, -1.2])
    v = apply_strategy(u, Honest(), UNIT, np.random.default_rng(0))
    np.testing.assert_array_equal(v, u)
    assert v is not u  # callers may mutate the result safely


def test_alternating_shift_values():
    u = np.array([0.5, 0.2])
    np.testing.assert_allclose(
        apply_strategy(u, AlternatingShift(), UNIT, np.random.default_rng(0)),
        [-0.5, -0.6],
        rtol=0, atol=1e-16,
    )
    u = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(
        apply_strategy(u, AlternatingShift(), UNIT, np.random.default_rng(0)),
        [0.0, 3.0, 2.0, 7.0],
    )


def test_apply_strategy_rejects_empty_block():
    with pytest.raises(ValueError):
        apply_strategy(np.array([]), Honest(), UNIT, np.random.default_rng(0))


def test_marginal_mimic_matches_honest_marginal():
    rng = np.random.default_rng(20)
    rec = sample_transmission(100_000, UNIT, rng)
    v = apply_strategy(rec.u, MarginalMimic(), UNIT, rng)
    assert v.shape == rec.u.shape
    mixture = lambda q: 0.5 * sps.norm.cdf(q - 1) + 0.5 * sps.norm.cdf(q + 1)
    assert sps.kstest(v, mixture).pvalue > 0.01
    fresh = sample_u_marginal(100_000, UNIT, np.random.default_rng(21))
    assert sps.ks_2samp(v, fresh).statistic < 0.01


def test_marginal_mimic_is_decorrelated():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng((7, seed))
        rec = sample_transmission(10_000, UNIT, rng)
        v = apply_strategy(rec.u, MarginalMimic(), UNIT, rng)
        worst = max(worst, abs(np.corrcoef(rec.u, v)[0, 1]))
    assert worst < 0.03


def test_deterministic_map_and_kernel():
    u = np.array([1.0, -2.0])
    rng = np.random.default_rng(0)
    v = apply_strategy(u, DeterministicMap(lambda a: a * 3.0), UNIT, rng)
    np.testing.assert_array_equal(v, [3.0, -6.0])
    with pytest.raises(ValueError, match="shape"):
        apply_strategy(u, DeterministicMap(lambda a: a[:1]), UNIT, rng)

    v = apply_strategy(u, IidKernel(lambda a, r: a + r.standard_normal(a.shape)), UNIT, rng)
    assert v.shape == u.shape
    with pytest.raises(ValueError, match="shape"):
        apply_strategy(u, IidKernel(lambda a, r: np.array([1.0])), UNIT, rng)

    with pytest.raises(TypeError):
        apply_strategy(u, "honest", UNIT, rng)


def test_attack_magnitude_single_sample():
    pair = build_nested_pair(2.0, 4, 2)
    # u in fine bin (-1, 0] nests into coarse bin (-2, 0]; forwarding 1.5
    # lands in coarse bin (0, 2], so the single observed row deviates by 2
    score = attack_magnitude(np.array([-0.1]), np.array([1.5]), pair)
    assert score.value == 2.0
    assert score.observed_rows == 1
    assert score.mode == "observed-rows"
    # from fine bin (0, 1] the same forwarded value is where it belongs
    assert attack_magnitude(np.array([0.1]), np.array([1.5]), pair).value == 0.0


def test_attack_magnitude_honest_relay_scores_zero():
    for seed in range(100):
        rng = np.random.default_rng((13, seed))
        pair = build_nested_pair(
            float(rng.uniform(1.0, 5.0)), int(rng.integers(4, 20)), int(rng.integers(2, 5))
        )
        rec = sample_transmission(int(rng.integers(10, 400)), UNIT, rng)
        assert attack_magnitude(rec.u, rec.u.copy(), pair).value == 0.0


def test_attack_magnitude_all_rows_mode():
    pair = build_nested_pair(2.0, 4, 2)
    u = v = np.array([-0.1])
    assert attack_magnitude(u, v, pair, mode="observed-rows").value == 0.0
    # the five unobserved one-hot rows each contribute their full mass
    allrows = attack_magnitude(u, v, pair, mode="all-rows")
    assert allrows.value == 5.0
    assert allrows.observed_rows == 1
    with pytest.raises(ValueError):
        attack_magnitude(u, v, pair, mode="some-rows")


def test_attack_magnitude_permutation_invariant():
    rng = np.random.default_rng(77)
    pair = build_nested_pair(3.0, 8, 3)
    u = rng.uniform(-4, 4, size=500)
    v = rng.uniform(-4, 4, size=500)
    base = attack_magnitude(u, v, pair).value
    perm = rng.permutation(500)
    assert attack_magnitude(u[perm], v[perm], pair).value == pytest.approx(base, abs=1e-12)


def test_attack_magnitude_length_mismatch():
    pair = build_nested_pair(2.0, 4, 2)
    with pytest.raises(ValueError):
        attack_magnitude(np.array([0.1, 0.2]), np.array([0.1]), pair)


def test_alternating_shift_is_loud():
    # a unit shift moves samples across sub-unit-width bins on every grid row
    pair = build_nested_pair(3.0, 14, 2)
    for seed in range(100):
        rng = np.random.default_rng((11, seed))
        rec = sample_transmission(1000, UNIT, rng)
        v = apply_strategy(rec.u, AlternatingShift(), UNIT, rng)
        assert attack_magnitude(rec.u, v, pair).value > 1.0


def test_constant_shift_scores_two_per_observed_row():
    pair = build_nested_pair(2.0, 4, 2)  # coarse interior width 2
    u = np.array([-1.5, -0.5, -1.2, -0.3])  # fine bins 1 and 2, both inside (-2, 0]
    v = u + 2.0  # every forwarded value crosses into (0, 2]
    score = attack_magnitude(u, v, pair)
    assert score.observed_rows == 2
    assert score.value == 2.0 * score.observed_rows
