"""Grid construction, quantization, nesting, and the sample-size schedule."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaycheck import (
    NestedGridPair,
    build_grid,
    build_nested_pair,
    nesting_matrix,
    quantize,
    schedule,
)


def test_build_grid_validation():
    with pytest.raises(ValueError):
        build_grid(2.0, 1.0, 10)
    with pytest.raises(ValueError):
        build_grid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        build_grid(-1.0, 1.0, 2)
    with pytest.raises(ValueError):
        build_grid(float("nan"), 1.0, 10)


def test_step_and_edges_frozen():
    g = build_grid(-5.0, 5.0, 100)
    assert g.step == 0.10204081632653061  # 10/98
    assert g.inner_edges.size == 99
    assert g.representatives.size == 100
    assert g.inner_edges[0] == -5.0 and g.inner_edges[-1] == 5.0
    assert g.representatives[-1] == 5.0 + g.step


def test_integer_grid_representatives():
    g = build_grid(-2.0, 2.0, 6)
    np.testing.assert_array_equal(g.inner_edges, [-2.0, -1.0, 0.0, 1.0, 2.0])
    np.testing.assert_array_equal(g.representatives, [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0])


def test_quantize_examples():
    g = build_grid(-5.0, 5.0, 100)
    assert g.quantize(-6.0) == 0          # lower tail
    assert g.quantize(-5.0) == 0          # alpha belongs to the tail bin
    assert g.quantize(float(g.inner_edges[1])) == 1  # right edges are inclusive
    assert g.quantize(0.0) == 49
    assert g.quantize(5.0) == 98          # beta closes the last interior bin
    assert g.quantize(5.2) == 99          # upper tail
    assert isinstance(g.quantize(0.25), int)

    idx = quantize(np.array([-6.0, 0.0, 5.2]), g)
    np.testing.assert_array_equal(idx, [0, 49, 99])


def test_quantize_rejects_non_finite():
    g = build_grid(-1.0, 1.0, 5)
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ValueError):
            g.quantize(bad)
    with pytest.raises(ValueError):
        g.quantize(np.array([0.0, float("nan")]))


def test_bin_interval_tails_and_bounds():
    g = build_grid(-2.0, 2.0, 6)
    assert g.bin_interval(0) == (-np.inf, -2.0)
    assert g.bin_interval(5) == (2.0, np.inf)
    assert g.bin_interval(1) == (-2.0, -1.0)
    with pytest.raises(ValueError):
        g.bin_interval(6)
    with pytest.raises(ValueError):
        g.bin_interval(-1)


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False))
def test_quantize_interval_containment(value):
    g = build_grid(-3.0, 3.0, 9)
    j = g.quantize(value)
    lo, hi = g.bin_interval(j)
    assert lo < value <= hi


@settings(max_examples=200)
@given(
    st.floats(min_value=-100, max_value=100, allow_nan=False),
    st.floats(min_value=-100, max_value=100, allow_nan=False),
)
def test_quantize_is_monotone(a, b):
    g = build_grid(-4.0, 4.0, 11)
    lo, hi = min(a, b), max(a, b)
    assert g.quantize(lo) <= g.quantize(hi)


def test_nested_pair_construction():
    pair = build_nested_pair(2.0, 4, 2)
    assert pair.coarse.bin_count == 4
    assert pair.fine.bin_count == 6
    assert pair.refinement == 2
    assert pair.fine.alpha == pair.coarse.alpha
    assert pair.fine.beta == pair.coarse.beta
    with pytest.raises(ValueError):
        build_nested_pair(2.0, 4, 0)
    with pytest.raises(ValueError):
        build_nested_pair(-1.0, 4, 2)


def test_nesting_matrix_frozen_example():
    w0 = nesting_matrix(build_nested_pair(2.0, 4, 2))
    assert w0.shape == (6, 4)
    np.testing.assert_array_equal(w0.sum(axis=1), np.ones(6, dtype=int))
    np.testing.assert_array_equal(w0.argmax(axis=1), [0, 1, 1, 2, 2, 3])


def _contains(outer, inner, tol):
    olo, ohi = outer
    ilo, ihi = inner
    lo_ok = olo == -np.inf if ilo == -np.inf else ilo >= olo - tol
    hi_ok = ohi == np.inf if ihi == np.inf else ihi <= ohi + tol
    return lo_ok and hi_ok


def test_nesting_matrix_against_interval_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        pair = build_nested_pair(
            float(rng.uniform(0.5, 5.0)),
            int(rng.integers(4, 13)),
            int(rng.integers(1, 5)),
        )
        w0 = nesting_matrix(pair)
        tol = 1e-9 * max(1.0, pair.fine.beta)
        for i in range(pair.fine.bin_count):
            members = [
                j
                for j in range(pair.coarse.bin_count)
                if _contains(pair.coarse.bin_interval(j), pair.fine.bin_interval(i), tol)
            ]
            assert members == [int(w0[i].argmax())]
            assert w0[i].sum() == 1


def test_nesting_matrix_rejects_straddling_bins():
    # interior widths 0.8 vs 2.0: fine bin (-0.4, 0.4] crosses the coarse edge at 0
    misaligned = NestedGridPair(
        fine=build_grid(-2.0, 2.0, 7), coarse=build_grid(-2.0, 2.0, 4), refinement=1
    )
    with pytest.raises(ValueError, match="straddles"):
        nesting_matrix(misaligned)


def test_schedule_fourth_root_sizes():
    sched = schedule(43_046_721)  # 81**4
    assert sched.u.bin_count == 43_046_721
    assert sched.u.alpha == -6561.0 and sched.u.beta == 6561.0
    assert sched.v.bin_count == 81
    assert sched.v.alpha == -9.0 and sched.v.beta == 9.0
    assert sched.y.bin_count == 3
    assert sched.y.beta == math.sqrt(3.0)
    assert sched.x == sched.y  # the direct link mirrors the relayed link


def test_schedule_rejects_collapsing_sizes():
    with pytest.raises(ValueError, match="relayed-output"):
        schedule(65_536)  # fourth roots give 16, then 2 bins
    with pytest.raises(ValueError):
        schedule(100)
    with pytest.raises(ValueError):
        schedule(2)
