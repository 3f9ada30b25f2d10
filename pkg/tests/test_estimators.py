import math

import numpy as np
import pytest
from scipy import stats

from transmittance import (
    Constant,
    DepthSamplerSpec,
    EstimatorSpec,
    EvalCounter,
    Fractal2DSlice,
    GaussianMix,
    Interval,
    LinearRamp,
    PiecewiseConstantGrid,
    RouletteSpec,
    SineSum,
    analytics,
    biased_ray_marching,
    delta_tracking,
    exact_optical_depth,
    johnson,
    piecewise_pdf_warp,
    ratio_tracking,
    resolve,
    run_trials,
    single_term_poisson,
    truncated_series,
    ubk,
    unbiased_ray_marching,
)
from transmittance import _backend
from transmittance.density import cell_means
from transmittance.estimators import make_rng, parse_kind, run_plan
from transmittance.roulette import UNBIASED_MARCHING_ROULETTE, bk_expected_order

from conftest import scaled_to, within_se

UNIT = Interval()
SINE1 = scaled_to(SineSum(((0.6, 7.0, 0.3), (0.3, 19.0, 1.1)), 1.0), 1.0)


class Scripted:
    """Stands in for a generator, replaying fixed uniforms."""

    def __init__(self, us):
        self.us = list(us)

    def random(self):
        return self.us.pop(0)


class Counting:
    """Profile wrapper that counts its own calls (no compiled twin)."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.inner(x)

    def integral(self, a, b):
        return self.inner.integral(a, b)

    def bounds(self, a, b):
        return self.inner.bounds(a, b)


def trials(spec, field, n=1_000_000, seed=0, interval=UNIT):
    return run_trials(spec, field, interval, n, seed=seed)


# -- tracking ---------------------------------------------------------------

def test_delta_tracking_vacuum():
    rng = np.random.default_rng(0)
    assert all(delta_tracking(Constant(0.0), UNIT, 1.0, rng).estimate == 1.0 for _ in range(100))


def test_delta_tracking_mean_and_variance():
    v, _ = trials(EstimatorSpec("delta_tracking"), Constant(1.0))
    ok, mean, se = within_se(v, math.exp(-1))
    assert ok
    assert v.var(ddof=1) == pytest.approx(math.exp(-1) - math.exp(-2), rel=0.03)


def test_johnson_n1_reduces_to_delta_tracking():
    for seed in range(300):
        a = delta_tracking(SINE1, UNIT, 2.0, np.random.default_rng(seed)).estimate
        b = johnson(SINE1, UNIT, 2.0, 1, np.random.default_rng(seed)).estimate
        assert a == b


def test_johnson_counts_by_hand():
    # pass 1 escapes at once; pass 2 collides once, then escapes: (1/2)^1
    us = [0.9, 0.1, 0.5, 0.9]
    assert johnson(Constant(1.0), UNIT, 1.0, 2, Scripted(us)).estimate == 0.5


def test_johnson_variance():
    v, _ = trials(EstimatorSpec("johnson", johnson_n=4), Constant(1.0))
    assert v.var(ddof=1) == pytest.approx(math.exp(-2) * (math.exp(0.25) - 1), rel=0.03)


def test_ratio_tracking_perfect_control():
    rng = np.random.default_rng(1)
    for _ in range(50):
        out = ratio_tracking(Constant(1.5), Interval(0, 2), 1.5, 1.5, rng)
        assert out.estimate == math.exp(-3.0) and out.evals_used == 0


def test_ratio_tracking_variance_and_cost():
    v, ev = trials(EstimatorSpec("ratio_tracking", majorant_scale=2.0), Constant(1.0))
    assert v.var(ddof=1) == pytest.approx(math.exp(-1.5) - math.exp(-2), rel=0.03)
    assert ev.mean() == pytest.approx(2.0, rel=0.01)


def test_rrt_rate_override_sets_cost():
    plan = resolve(EstimatorSpec("rrt", control=0.5, rate=3.0), Constant(1.0), UNIT)
    assert plan.rate == 3.0
    _, ev = run_trials(plan, Constant(1.0), UNIT, 200_000)
    assert ev.mean() == pytest.approx(3.0, rel=0.01)


def test_single_term_poisson_matches_ratio_tracking_in_distribution():
    # with control = majorant and rate = majorant * l both are prod(1 - mu / majorant)
    maj = 2.0
    v_rt, _ = trials(EstimatorSpec("ratio_tracking", majorant=maj), SINE1, 100_000, seed=1)
    v_stp, _ = trials(EstimatorSpec("single_term_poisson", control=maj, rate=maj, majorant=maj), SINE1,
                      100_000, seed=2)
    assert stats.ks_2samp(v_rt, v_stp).pvalue > 1e-3
    assert within_se(v_stp, math.exp(-1))[0]
    rng = np.random.default_rng(0)
    assert single_term_poisson(Constant(1.0), UNIT, 1.0, 0.0, rng).estimate == math.exp(-1)


# -- series -------------------------------------------------------------------

def test_truncated_series_perfect_control():
    rng = np.random.default_rng(3)
    for c in (0.5, 2.0, 6.0):
        spec = EstimatorSpec("bk", control=2.0, roulette=RouletteSpec(c))
        for _ in range(20):
            assert truncated_series(Constant(2.0), UNIT, spec, rng).estimate == math.exp(-2.0)
        assert ubk(Constant(2.0), UNIT, EstimatorSpec("ubk", control=2.0), rng).estimate == math.exp(-2.0)


def test_pseries_cmf_unbiased():
    v, _ = trials(EstimatorSpec("pseries_cmf", majorant=2.0), Constant(1.0))
    assert within_se(v, math.exp(-1))[0]


def test_bk_uniform_variance_series():
    spec = EstimatorSpec("bk", control=0.5, roulette=RouletteSpec(2.0, 2))
    v, _ = trials(spec, Constant(1.0), 2_000_000)
    assert v.var(ddof=1) == pytest.approx(analytics.var_bk_uniform(1.0, 0.5, 2.0, 2), rel=0.03)


def test_ubk_equals_bk_when_at_most_one_sample():
    bk = resolve(EstimatorSpec("bk", control=1.0, roulette=RouletteSpec(1.0, 0)), SINE1, UNIT)
    ub = resolve(EstimatorSpec("ubk", control=1.0, roulette=RouletteSpec(1.0, 0)), SINE1, UNIT)
    seen = 0
    for seed in range(400):
        a = run_plan(bk, SINE1, np.random.default_rng(seed))
        b = run_plan(ub, SINE1, np.random.default_rng(seed))
        if a.evals_used <= 1:
            seen += 1
            assert a.estimate == b.estimate
    assert seen > 100


def test_ubk_variance_not_above_bk():
    kw = dict(control=0.5, roulette=RouletteSpec(2.0, 2))
    n = 1_000_000
    b, _ = trials(EstimatorSpec("bk", **kw), SINE1, n, seed=9)
    u, _ = trials(EstimatorSpec("ubk", **kw), SINE1, n, seed=9)
    d = (u - u.mean()) ** 2 - (b - b.mean()) ** 2
    assert d.mean() <= 4 * d.std(ddof=1) / math.sqrt(n)


# -- ray marching ---------------------------------------------------------------

@pytest.mark.parametrize("fn", [unbiased_ray_marching, biased_ray_marching])
def test_marching_exact_on_constant(fn):
    tau = 2.7
    target = math.exp(-tau)
    for seed in range(1000):
        est = fn(Constant(tau / 1.5), Interval(0.5, 2.0), None, np.random.default_rng(seed)).estimate
        assert abs(est - target) <= math.ulp(target)


def test_urm_ramp_with_epm_is_exact():
    for seed in range(200):
        for M in (2, 3, 7):
            est = unbiased_ray_marching(LinearRamp(0.0, 2.0), UNIT, 1.0, np.random.default_rng(seed),
                                        M=M, epm="on").estimate
            assert est == pytest.approx(math.exp(-1), abs=1e-12)


def test_urm_sine_unbiased_and_cost():
    spec = EstimatorSpec("unbiased_ray_marching")
    plan = resolve(spec, SINE1, UNIT)
    v, ev = run_trials(plan, SINE1, UNIT, 1_000_000, seed=4)
    assert within_se(v, math.exp(-1))[0]
    M = plan.sampler.M
    expected = (bk_expected_order(UNBIASED_MARCHING_ROULETTE) + 1) * M + 2 * plan.sampler.endpoint_matching
    assert ev.mean() == pytest.approx(expected, rel=0.01)


def test_brm_bias_sign_and_mse():
    for field in (SINE1, scaled_to(LinearRamp(0.2, 2.0), 1.0),
                  scaled_to(GaussianMix(((1.5, 0.4, 0.1),), 0.3), 1.0)):
        tau = exact_optical_depth(field, UNIT)
        v, _ = trials(EstimatorSpec("brm", M=4), field, 200_000, seed=5)
        ok = v.mean() >= math.exp(-tau) - 4 * v.std(ddof=1) / math.sqrt(len(v))
        assert ok
    n = 1_000_000
    b, _ = trials(EstimatorSpec("brm", control_thickness=3.0), SINE1, n, seed=6)
    u, _ = trials(EstimatorSpec("urm", control_thickness=3.0), SINE1, n, seed=7)
    assert np.mean((b - math.exp(-1)) ** 2) <= u.var(ddof=1)


def test_marching_rejects_iid():
    with pytest.raises(ValueError):
        resolve(EstimatorSpec("urm", sampler=DepthSamplerSpec(M=2)), SINE1, UNIT)


# -- accounting and guards ----------------------------------------------------------

SPECS = [
    EstimatorSpec("delta_tracking"),
    EstimatorSpec("johnson", johnson_n=3),
    EstimatorSpec("rrt"),
    EstimatorSpec("single_term_poisson", sampler=DepthSamplerSpec(M=2, pattern="equidistant",
                                                                   endpoint_matching=True)),
    EstimatorSpec("bk", control=1.0),
    EstimatorSpec("ubk", control=1.0, sampler=DepthSamplerSpec(M=3, pattern="golden")),
    EstimatorSpec("pseries_cmf", repeats=2),
    EstimatorSpec("urm", M=6),
    EstimatorSpec("brm", sampler=DepthSamplerSpec(pattern="mirrored")),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_eval_counts_match_independent_recount(spec):
    wrapped = Counting(SINE1)
    plan = resolve(spec, SINE1, UNIT)
    rng = np.random.default_rng(11)
    for _ in range(300):
        before = wrapped.calls
        out = run_plan(plan, wrapped, rng)
        assert out.evals_used == wrapped.calls - before


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_degenerate_interval(spec):
    iv = Interval(0.3, 0.3 + 1e-12)
    v, _ = run_trials(spec, SINE1, iv, 500, seed=1)
    assert np.all(np.abs(v - 1.0) <= 1e-9)


FIELDS = [
    SINE1,
    LinearRamp(0.3, 1.7),
    GaussianMix(((1.0, 0.3, 0.1),), 0.2),
    PiecewiseConstantGrid((0.5, 2.0, 0.0, 1.25), 0.25),
    Fractal2DSlice(scale=2.0),
]


@pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")
@pytest.mark.parametrize("field", FIELDS, ids=lambda f: type(f).__name__)
@pytest.mark.parametrize("spec", SPECS + [
    EstimatorSpec("urm", M=5, sampler=DepthSamplerSpec(pattern="equidistant",
                                                        warp=piecewise_pdf_warp([1, 2, 3, 4]))),
    EstimatorSpec("brm", M=4, epm="on", sampler=DepthSamplerSpec(
        pattern="golden", warp=piecewise_pdf_warp([1, 3]), epm_warped=False)),
], ids=lambda s: s.kind)
def test_backends_agree_bitwise(field, spec):
    iv = Interval(0.1, 0.9)
    if spec.sampler is not None and spec.sampler.warp is not None:
        spec = EstimatorSpec(spec.kind, M=spec.M, epm=spec.epm, sampler=DepthSamplerSpec(
            pattern=spec.sampler.pattern,
            warp=piecewise_pdf_warp(cell_means(field, iv, spec.sampler.warp.n), iv),
            epm_warped=spec.sampler.epm_warped))
    a = run_trials(spec, field, iv, 5000, seed=3, backend="python")
    b = run_trials(spec, field, iv, 5000, seed=3, backend="cython")
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_workers_do_not_change_results():
    spec = EstimatorSpec("urm")
    a = run_trials(spec, SINE1, UNIT, 20_000, seed=5, workers=1)
    b = run_trials(spec, SINE1, UNIT, 20_000, seed=5, workers=8)
    assert np.array_equal(a[0], b[0])


def test_make_rng_streams_differ_by_key():
    assert make_rng(1, (2, 3), 0).random() != make_rng(1, (2, 4), 0).random()
    assert make_rng(1, (2, 3), 0).random() == make_rng(1, (2, 3), 0).random()


def test_spec_validation():
    with pytest.raises(ValueError):
        EstimatorSpec("nonsense")
    with pytest.raises(ValueError):
        EstimatorSpec("bk", majorant_scale=0.5)
    with pytest.raises(ValueError):
        resolve(EstimatorSpec("dt", majorant=0.5), Constant(1.0), UNIT)
    assert parse_kind("RRT") == "residual_ratio_tracking"
