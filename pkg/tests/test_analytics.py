import math

import numpy as np
import pytest
from scipy import integrate

from transmittance import Constant, DepthSamplerSpec, EstimatorSpec, Interval, RouletteSpec, analytics, run_trials
from transmittance.roulette import bk_expected_order

from conftest import UNIT, scaled_to, test_fields

SINE = test_fields(1.0)["sine"]


def test_variance_formulas_by_hand():
    assert analytics.var_delta_tracking(0.0) == 0.0
    assert analytics.var_delta_tracking(1.0) == pytest.approx(0.232544, abs=1e-6)
    for tau in (0.5, 1.0, 2.0):
        assert analytics.var_johnson(tau, 1) == pytest.approx(analytics.var_delta_tracking(tau), rel=1e-14)
    with pytest.raises(ValueError):
        analytics.var_johnson(1.0, 0)


def test_var_rrt_examples():
    assert analytics.var_rrt(Constant(1.0), UNIT, 2.0, 0.0) == pytest.approx(math.exp(-1.5) - math.exp(-2.0), rel=1e-12)
    for mu in (0.5, 1.0, 3.0):
        assert analytics.var_rrt(Constant(mu), UNIT, mu, 0.0) == pytest.approx(
            math.exp(-mu) - math.exp(-2 * mu), rel=1e-12)
    assert analytics.var_rrt(Constant(1.3), UNIT, 2.0, 1.3) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        analytics.var_rrt(SINE, UNIT, 2.0, 2.0)


def test_var_rrt_against_monte_carlo():
    iv = Interval(0.0, 1.0)
    oracle = analytics.var_rrt(SINE, iv, 2.5, 0.6)
    v, _ = run_trials(EstimatorSpec("rrt", majorant=2.5, control=0.6), SINE, iv, 1_000_000, seed=2)
    assert v.var(ddof=1) == pytest.approx(oracle, rel=0.03)


def test_cost_formulas():
    assert analytics.cost_formulas("rrt", tau_bar_r=2.0) == 2.0
    assert analytics.cost_formulas("delta_tracking", tau_bar=2.0, tau=1.0) == pytest.approx(1.26424, abs=1e-5)
    assert analytics.cost_formulas("johnson", tau_bar=2.0, n=3, M=2) == 12.0
    assert analytics.cost_formulas("bk", c=2.0) == pytest.approx(3.19453, abs=1e-5)
    assert analytics.cost_bk(2.0) == bk_expected_order(RouletteSpec(2.0))
    with pytest.raises(ValueError):
        analytics.cost_formulas("nope")


def test_delta_tracking_cost_against_monte_carlo():
    _, ev = run_trials(EstimatorSpec("delta_tracking", majorant=2.0), Constant(1.0), UNIT, 400_000, seed=3)
    assert ev.mean() == pytest.approx(analytics.cost_delta_tracking(2.0, 1.0), rel=0.01)


def test_var_bk_uniform_zero_when_pivot_exact():
    for c, K in ((2.0, 2), (1.0, 1), (3.5, 1)):
        assert abs(analytics.var_bk_uniform(1.7, 1.7, c, K)) < 1e-12
        assert abs(analytics.var_ubk_optimal(1.7, 0.0, roulette=RouletteSpec(c, K))) < 1e-12


def test_var_bk_uniform_against_brute_force():
    # independent enumeration over the stopping order with exact Pr[N = n]
    tau, tau_c, c, K = 1.0, 0.5, 2.0, 2
    Y = tau_c - tau
    m1 = m2 = 0.0
    surv = 1.0
    for n in range(K, 200):
        p_stop = surv * (1 - min(c / (n + 1), 1.0))
        est = math.exp(-tau_c) * sum(_taylor(Y, k) / _surv(c, K, k) for k in range(n + 1))
        m1 += p_stop * est
        m2 += p_stop * est * est
        surv *= min(c / (n + 1), 1.0)
    assert m1 == pytest.approx(math.exp(-tau), rel=1e-12)
    assert analytics.var_bk_uniform(tau, tau_c, c, K) == pytest.approx(m2 - m1 * m1, rel=1e-10)


def _taylor(y, k):
    t = 1.0
    for i in range(1, k + 1):
        t *= y / i
    return t


def _surv(c, K, k):
    q = 1.0
    for i in range(K + 1, k + 1):
        q *= min(c / i, 1.0)
    return q


def test_var_bk_uniform_monte_carlo():
    spec = EstimatorSpec("bk", control=0.5, roulette=RouletteSpec(2.0, 2))
    v, _ = run_trials(spec, Constant(1.0), UNIT, 10_000_000, seed=4)
    assert v.var(ddof=1) == pytest.approx(analytics.var_bk_uniform(1.0, 0.5, 2.0, 2), rel=0.03)


def test_series_divergence_is_reported():
    with pytest.raises(analytics.SeriesDivergence, match="c=0.001"):
        analytics.var_bk_uniform(1.0, -40.0, 1e-3, 0)


def _ey2(field, tau):
    return integrate.quad(lambda x: (tau - field(x)) ** 2, 0.0, 1.0)[0]


def test_ubk_fixed_zero_residual():
    assert analytics.var_ubk_optimal(1.0, 0.0, N=4) == 0.0


@pytest.mark.parametrize("N", [1, 3])
def test_var_ubk_fixed_against_monte_carlo(N):
    spec = EstimatorSpec("ubk", control=1.0, roulette=RouletteSpec.fixed(N), sampler=DepthSamplerSpec(M=1))
    v, _ = run_trials(spec, SINE, UNIT, 1_000_000, seed=5 + N)
    assert v.var(ddof=1) == pytest.approx(analytics.var_ubk_optimal(1.0, _ey2(SINE, 1.0), N=N), rel=0.03)


def test_var_ubk_roulette_against_monte_carlo():
    field = scaled_to(SINE, 2.0)
    rl = RouletteSpec(2.0, 2)
    spec = EstimatorSpec("ubk", control=2.0, roulette=rl, sampler=DepthSamplerSpec(M=1))
    v, _ = run_trials(spec, field, UNIT, 2_000_000, seed=8)
    oracle = analytics.var_ubk_optimal(2.0, _ey2(field, 2.0), roulette=rl)
    assert v.var(ddof=1) == pytest.approx(oracle, rel=0.03)


def test_ubk_binomial_reduction_beats_fixed_bk():
    for N in (2, 4, 8):
        assert analytics.var_ubk_optimal(1.0, 0.7, N=N) < analytics.var_bk_fixed_optimal(1.0, 0.7, N)
    assert analytics.var_ubk_optimal(1.0, 0.7, N=1) == analytics.var_bk_fixed_optimal(1.0, 0.7, 1)
    with pytest.raises(ValueError):
        analytics.var_ubk_optimal(1.0, 0.7)


def test_efficiency():
    rep = analytics.efficiency(0.25, 4.0)
    assert rep.efficiency == 1.0 and rep.inverse_efficiency == 1.0
    assert rep.efficiency * rep.variance * rep.cost == pytest.approx(1.0)
    zero = analytics.efficiency(0.0, 10.0)
    assert zero.infinite and math.isinf(zero.efficiency)
    dt = analytics.efficiency(analytics.var_delta_tracking(1.0), analytics.cost_delta_tracking(1.0, 1.0))
    assert dt.efficiency == pytest.approx(6.803, abs=1e-3)
    with pytest.raises(ValueError):
        analytics.efficiency(1.0, 0.0)


@pytest.mark.parametrize("mean", [0.0, 0.5])
@pytest.mark.parametrize("p", [0.1, 0.5])
def test_roulette_efficiency_identity(mean, p):
    rng = np.random.default_rng(int(100 * p + 10 * mean))
    n = 2_000_000
    x = mean + rng.standard_normal(n)
    survive = rng.random(n) < p
    weighted = np.where(survive, x / p, 0.0)
    assert p * weighted.var() == pytest.approx(analytics.roulette_weighted_variance(mean, 1.0, p), rel=0.03)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_product_variance(k):
    rng = np.random.default_rng(k)
    v = 0.8
    # uniform on +-sqrt(3v): zero mean, variance v, light tails
    y = rng.uniform(-math.sqrt(3 * v), math.sqrt(3 * v), size=(10_000_000, k)).prod(axis=1)
    ratio = y.var() / v**k
    assert 0.9 <= ratio <= 1.1
    assert analytics.product_variance(v, 0.0, k) == pytest.approx(v**k)
