"""Monte Carlo transmittance estimators for 1-D extinction profiles."""

from . import analytics, roulette, symmetric
from ._backend import DEFAULT as _DEFAULT_BACKEND, available as available_backends
from .density import (
    Constant,
    EvalCounter,
    FieldStats,
    Fractal2DSlice,
    GaussianMix,
    Interval,
    LinearRamp,
    PiecewiseConstantGrid,
    SineSum,
    WarpMap,
    cell_means,
    evaluate,
    exact_optical_depth,
    field_stats,
    piecewise_pdf_warp,
)
from .depth import (
    DepthEstimate,
    DepthSamplerSpec,
    Pattern,
    SamplingSupportError,
    comb_estimate,
    estimate_variance,
    iid_estimate,
)
from .estimators import (
    EstimatorSpec,
    TrialOutcome,
    biased_ray_marching,
    delta_tracking,
    johnson,
    ratio_tracking,
    resolve,
    run_trials,
    single_term_poisson,
    truncated_series,
    ubk,
    unbiased_ray_marching,
)
from .roulette import RouletteSpec

BACKEND = _DEFAULT_BACKEND.name

__version__ = "0.1.0"
