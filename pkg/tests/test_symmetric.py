import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transmittance.symmetric import (
    SymmetricMeansAccumulator,
    means_exact,
    means_girard_newton,
    means_incremental,
    means_naive,
)

FAST = (means_girard_newton, means_incremental)


def brute(xs, k):
    # independent oracle: exact rationals over explicit subsets
    subsets = list(itertools.combinations([Fraction(x) for x in xs], k))
    return sum((math.prod(s) for s in subsets), Fraction(0)) / len(subsets)


def test_one_two_three_by_hand():
    # e = (6, 11, 6), C(3,k) = (3, 3, 1)
    expected = [1.0, 2.0, 11.0 / 3.0, 6.0]
    assert means_naive([1, 2, 3]) == pytest.approx(expected, rel=1e-15)
    assert means_girard_newton([1, 2, 3]) == pytest.approx(expected, rel=1e-15)
    assert means_incremental([1, 2, 3], 3) == pytest.approx(expected, rel=1e-15)
    assert [brute([1, 2, 3], k) for k in range(1, 4)] == [2, Fraction(11, 3), 6]


def test_small_cases():
    assert means_naive([0, 0, 0, 0]) == [1.0, 0.0, 0.0, 0.0, 0.0]
    assert means_naive([2.5]) == [1.0, 2.5]
    assert means_girard_newton([-1.0, 1.0]) == [1.0, 0.0, -1.0]
    assert means_incremental([5.0], 1) == [1.0, 5.0]


@pytest.mark.parametrize("fn", (means_naive,) + FAST)
def test_equal_values_give_powers(fn):
    c = 1.3
    m = fn([c] * 7)
    assert m == pytest.approx([c**k for k in range(8)], rel=1e-12)


def test_naive_refuses_large_n():
    with pytest.raises(ValueError):
        means_naive([1.0] * 21)


def test_exact_reference_matches_brute_force():
    xs = [0.5, -1.25, 3.0, 2.0, -0.75]
    assert means_exact(xs) == [Fraction(1)] + [brute(xs, k) for k in range(1, 6)]


def test_twelve_uniform_values():
    xs = list(np.random.default_rng(7).uniform(-3, 3, 12))
    ref = means_naive(xs, 12)
    for fn in FAST:
        for a, b in zip(fn(xs, 12), ref):
            assert abs(a - b) <= 1e-10 * max(abs(b), 1e-300)


def test_oracle_equivalence_1000_inputs():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        xs = list(rng.uniform(-3, 3, n))
        ref = means_naive(xs)
        for fn in FAST:
            for a, b in zip(fn(xs), ref):
                worst = max(worst, abs(a - b) / abs(b))
    assert worst <= 1e-10
    assert time.perf_counter() - t0 < 30.0


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=10), st.randoms())
@settings(max_examples=150, deadline=None)
def test_permutation_invariance(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    for a, b in zip(means_incremental(xs), means_incremental(ys)):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=15))
@settings(max_examples=150, deadline=None)
def test_streaming_equals_batch(xs):
    acc = SymmetricMeansAccumulator(len(xs))
    for x in xs:
        acc.push(x)
    assert acc.means == means_incremental(xs)


def test_truncated_order():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert means_incremental(xs, 2) == means_incremental(xs)[:3]
    with pytest.raises(ValueError):
        means_girard_newton(xs, 5)


def test_incremental_robust_near_large_offset():
    xs = list(100.0 + np.random.default_rng(1).normal(0.0, 1e-3, 64))
    exact = [float(v) for v in means_exact(xs)]

    def err(vals):
        return max(abs(a - b) / abs(b) for a, b in zip(vals, exact))

    e_gn = err(means_girard_newton(xs, compensated=False))
    e_inc = err(means_incremental(xs))
    print(f"relative error: girard-newton {e_gn:.3g}, incremental {e_inc:.3g}")
    assert e_inc < 1e-12
    assert 10 * e_inc <= e_gn


def test_plain_girard_newton_loses_digits_on_spread_inputs():
    # the reason the default path runs in extended precision
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        xs = list(rng.normal(0.0, 1.0, 12))
        ref = means_naive(xs)
        worst = max(worst, max(abs(a - b) / abs(b)
                               for a, b in zip(means_girard_newton(xs, compensated=False), ref)))
    assert worst > 1e-10
