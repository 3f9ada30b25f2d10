"""Transmittance estimators: tracking, truncated power series and ray marching.

An :class:`EstimatorSpec` is a declarative description; :func:`resolve`
turns it, together with a field and interval, into a :class:`Plan` whose
numbers are all fixed.  Plans run either one trial at a time through the
functions below or in bulk through :func:`run_trials`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _backend
from . import _reference as ref
from ._plan import Kind, Plan
from .density import EvalCounter, Interval, field_stats
from .depth import DepthSamplerSpec, Pattern, check_support
from .roulette import (
    UNBIASED_MARCHING_ROULETTE,
    RouletteSpec,
    cmf99_order,
    cmf_expected_samples,
    tuple_size,
)

__all__ = [
    "BLOCK_SIZE",
    "EstimatorSpec",
    "Kind",
    "Plan",
    "TrialOutcome",
    "biased_ray_marching",
    "delta_tracking",
    "johnson",
    "make_rng",
    "parse_kind",
    "ratio_tracking",
    "resolve",
    "run_plan",
    "run_trials",
    "single_term_poisson",
    "truncated_series",
    "ubk",
    "unbiased_ray_marching",
]

BLOCK_SIZE = 4096

_KIND_NAMES = {
    "deltatracking": "delta_tracking",
    "dt": "delta_tracking",
    "johnson": "johnson",
    "ratiotracking": "ratio_tracking",
    "rt": "ratio_tracking",
    "residualratiotracking": "residual_ratio_tracking",
    "rrt": "residual_ratio_tracking",
    "singletermpoisson": "single_term_poisson",
    "poisson": "single_term_poisson",
    "truncatedbk": "bk",
    "bk": "bk",
    "truncatedseries": "bk",
    "ubk": "ubk",
    "pseriescmf": "pseries_cmf",
    "unbiasedraymarching": "unbiased_ray_marching",
    "urm": "unbiased_ray_marching",
    "biasedraymarching": "biased_ray_marching",
    "brm": "biased_ray_marching",
    "depth": "depth",
}


def parse_kind(name: str) -> str:
    key = str(name).lower().replace("_", "").replace("-", "").replace(" ", "")
    try:
        return _KIND_NAMES[key]
    except KeyError:
        raise ValueError(f"unknown estimator kind {name!r}") from None


class TrialOutcome(NamedTuple):
    estimate: float
    evals_used: int


@dataclass(frozen=True)
class EstimatorSpec:
    """Declarative estimator choice.

    ``None`` fields take the per-kind defaults applied by :func:`resolve`.
    ``control`` is a constant extinction (the pivot is ``-control * l``);
    ``M`` fixes the comb size of the ray-marching estimators, otherwise it is
    derived from ``control_thickness``.
    """

    kind: str
    label: str | None = None
    control: float | None = None
    majorant_scale: float = 1.0
    roulette: RouletteSpec | None = None
    sampler: DepthSamplerSpec | None = None
    M: int | None = None
    control_thickness: float | None = None
    epm: str = "auto"
    johnson_n: int = 1
    rate: float | None = None
    repeats: int = 1
    # absolute majorant; overrides majorant_scale when set
    majorant: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        if self.label is None:
            object.__setattr__(self, "label", self.kind)
        if not self.majorant_scale >= 1.0:
            raise ValueError("majorant_scale must be >= 1")
        if self.epm not in ("auto", "on", "off"):
            raise ValueError("epm must be 'auto', 'on' or 'off'")
        if self.johnson_n < 1:
            raise ValueError("Johnson's estimator needs n >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.M is not None and self.M < 1:
            raise ValueError("M must be positive")
        if self.rate is not None and self.rate < 0:
            raise ValueError("rate must be nonnegative")


def _epm(policy: str, M: int) -> bool:
    if policy == "auto":
        return M >= 6
    return policy == "on"


def resolve(spec: EstimatorSpec, field, interval: Interval, stats=None) -> Plan:
    """Fix every parameter of ``spec`` for one field and interval."""
    stats = stats or field_stats(field, interval)
    ell = interval.length
    maj = stats.majorant * spec.majorant_scale
    if spec.majorant is not None:
        if spec.majorant < stats.majorant:
            raise ValueError(f"majorant {spec.majorant} is below the field bound {stats.majorant}")
        maj = spec.majorant
    lo = stats.minorant
    base = dict(kind=None, a=interval.a, b=interval.b, majorant=maj,
                johnson_n=spec.johnson_n, repeats=spec.repeats)
    kind = spec.kind
    sampler = spec.sampler or DepthSamplerSpec()

    if kind in ("delta_tracking", "johnson"):
        base["kind"] = Kind.DELTA_TRACKING if kind == "delta_tracking" else Kind.JOHNSON
        return Plan(**base)

    if kind in ("ratio_tracking", "residual_ratio_tracking"):
        if kind == "ratio_tracking":
            ctrl = 0.0 if spec.control is None else spec.control
        else:
            ctrl = lo if spec.control is None else spec.control
        rate = (maj - ctrl) * ell if spec.rate is None else spec.rate
        if rate < 0:
            raise ValueError("control exceeds the majorant")
        if rate == 0 and not (lo == stats.majorant == ctrl):
            raise ValueError("zero tracking rate requires a residual that vanishes identically")
        return Plan(**{**base, "kind": Kind.RATIO_TRACKING, "control": ctrl, "rate": rate})

    if kind == "single_term_poisson":
        ctrl = maj if spec.control is None else spec.control
        rate = (maj - lo) * ell if spec.rate is None else spec.rate
        if rate == 0 and not (lo == stats.majorant == ctrl):
            raise ValueError("zero Poisson rate requires a residual that vanishes identically")
        sampler = replace(sampler, control=ctrl)
        check_support(field, interval, sampler)
        return Plan(**{**base, "kind": Kind.SINGLE_TERM_POISSON, "control": ctrl,
                       "rate": rate, "sampler": sampler})

    if kind in ("bk", "ubk", "pseries_cmf"):
        if kind == "pseries_cmf":
            ctrl = maj if spec.control is None else spec.control
            tau_bar = maj * ell
            roulette = spec.roulette or RouletteSpec(c=tau_bar, K=cmf99_order(tau_bar) + 1)
            code = Kind.TRUNCATED_SERIES
        else:
            ctrl = maj if spec.control is None else spec.control
            # c tracks the largest |Y|: the second moment grows like exp(Y^2 / c)
            resid = max(abs(ctrl - lo), abs(ctrl - stats.majorant)) * ell
            roulette = spec.roulette or RouletteSpec(c=max(2.0, resid))
            code = Kind.TRUNCATED_SERIES if kind == "bk" else Kind.UBK
        sampler = replace(sampler, control=ctrl)
        check_support(field, interval, sampler)
        return Plan(**{**base, "kind": code, "control": ctrl, "roulette": roulette,
                       "sampler": sampler})

    if kind in ("unbiased_ray_marching", "biased_ray_marching"):
        tau_ctrl = (maj - lo) * ell if spec.control_thickness is None else spec.control_thickness
        if tau_ctrl < 0:
            raise ValueError("control thickness must be nonnegative")
        pattern = sampler.pattern if spec.sampler is not None else Pattern.EQUIDISTANT
        if pattern is Pattern.IID:
            raise ValueError("ray marching needs a comb pattern")
        if kind == "unbiased_ray_marching":
            roulette = spec.roulette or UNBIASED_MARCHING_ROULETTE
            M = spec.M or tuple_size(tau_ctrl, roulette if roulette.c > 0 else UNBIASED_MARCHING_ROULETTE)
            code = Kind.UNBIASED_MARCHING
        else:
            roulette = RouletteSpec(0.0, 0)
            M = spec.M or cmf_expected_samples(tau_ctrl)
            code = Kind.BIASED_MARCHING
        epm = _epm(spec.epm, M) and pattern is not Pattern.MIRRORED
        sampler = replace(sampler, M=M, pattern=pattern, endpoint_matching=epm, control=0.0)
        check_support(field, interval, sampler)
        return Plan(**{**base, "kind": code, "roulette": roulette, "sampler": sampler})

    if kind == "depth":
        if spec.sampler is None:
            raise ValueError("a depth estimator needs a sampler")
        check_support(field, interval, sampler)
        return Plan(**{**base, "kind": Kind.DEPTH, "control": sampler.control, "sampler": sampler})

    raise ValueError(f"unhandled estimator kind {kind!r}")  # pragma: no cover


def _outcome(plan, field, rng, counter) -> TrialOutcome:
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    value = ref.run_trial(plan, field, rng, counter)
    return TrialOutcome(value, counter.count - before)


def run_plan(plan: Plan, field, rng, counter: EvalCounter | None = None) -> TrialOutcome:
    """One trial of a resolved plan on the pure-Python path."""
    return _outcome(plan, field, rng, counter)


def delta_tracking(field, interval, majorant, rng, counter=None) -> TrialOutcome:
    """Binary estimate: 0 at the first real collision, 1 if the ray escapes."""
    plan = Plan(Kind.DELTA_TRACKING, interval.a, interval.b, majorant=majorant)
    return _outcome(plan, field, rng, counter)


def johnson(field, interval, majorant, n, rng, counter=None) -> TrialOutcome:
    """``(1 - 1/n)^total`` over ``n`` complete thinned traversals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    plan = Plan(Kind.JOHNSON, interval.a, interval.b, majorant=majorant, johnson_n=n)
    return _outcome(plan, field, rng, counter)


def ratio_tracking(field, interval, majorant, control, rng, counter=None, rate=None) -> TrialOutcome:
    """Ratio tracking; a nonzero ``control`` gives residual ratio tracking."""
    ell = interval.length
    lam = (majorant - control) * ell if rate is None else rate
    if lam < 0:
        raise ValueError("control exceeds the majorant")
    plan = Plan(Kind.RATIO_TRACKING, interval.a, interval.b, majorant=majorant,
                control=control, rate=lam)
    return _outcome(plan, field, rng, counter)


def single_term_poisson(field, interval, control, rate, rng, counter=None,
                        sampler: DepthSamplerSpec | None = None) -> TrialOutcome:
    """``e^(lambda - tau_c) prod(Y_i / lambda)`` with ``N ~ Poisson(lambda)``."""
    sampler = replace(sampler or DepthSamplerSpec(), control=control)
    plan = Plan(Kind.SINGLE_TERM_POISSON, interval.a, interval.b, control=control,
                rate=rate, sampler=sampler)
    return _outcome(plan, field, rng, counter)


def _series(field, interval, spec, rng, counter, kinds):
    if spec.kind not in kinds:
        raise ValueError(f"expected one of {kinds}, got {spec.kind}")
    return _outcome(resolve(spec, field, interval), field, rng, counter)


def truncated_series(field, interval, spec: EstimatorSpec, rng, counter=None) -> TrialOutcome:
    return _series(field, interval, spec, rng, counter, ("bk", "pseries_cmf"))


def ubk(field, interval, spec: EstimatorSpec, rng, counter=None) -> TrialOutcome:
    """Series estimator with elementary symmetric means as numerators."""
    return _series(field, interval, spec, rng, counter, ("ubk",))


def unbiased_ray_marching(field, interval, control_thickness, rng, counter=None, **options) -> TrialOutcome:
    spec = EstimatorSpec("unbiased_ray_marching", control_thickness=control_thickness, **options)
    return _outcome(resolve(spec, field, interval), field, rng, counter)


def biased_ray_marching(field, interval, control_thickness, rng, counter=None, **options) -> TrialOutcome:
    spec = EstimatorSpec("biased_ray_marching", control_thickness=control_thickness, **options)
    return _outcome(resolve(spec, field, interval), field, rng, counter)


def make_rng(seed: int, key: tuple[int, ...] = (), block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(*key, block))
    return np.random.Generator(np.random.PCG64(ss))


def run_trials(spec_or_plan, field, interval: Interval | None = None, trials: int = 1000,
               seed: int = 0, key: tuple[int, ...] = (), workers: int = 1,
               backend: str | None = None, first_block: int = 0):
    """Run ``trials`` independent trials; returns ``(values, evals)`` arrays.

    Trials are grouped in blocks of :data:`BLOCK_SIZE`, each with its own
    generator derived from ``(seed, *key, block)``.  Results are placed in
    trial order, so the output does not depend on ``workers``.
    """
    if isinstance(spec_or_plan, Plan):
        plan = spec_or_plan
    else:
        plan = resolve(spec_or_plan, field, interval)
    impl = _backend.get(backend)
    n_blocks = -(-trials // BLOCK_SIZE)

    def block(i):
        n = min(BLOCK_SIZE, trials - i * BLOCK_SIZE)
        return impl.run_block(plan, field, n, make_rng(seed, key, first_block + i))

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(i) for i in range(n_blocks)]
    if not parts:
        return np.empty(0), np.empty(0, dtype=np.int64)
    values = np.concatenate([p[0] for p in parts])
    evals = np.concatenate([p[1] for p in parts])
    return values, evals


def analytic_cost_hint(plan: Plan) -> float:
    """Rough expected lookups per trial, used to size trial counts."""
    s = plan.sampler
    if plan.kind in (Kind.DELTA_TRACKING, Kind.JOHNSON):
        return plan.majorant * plan.length * plan.johnson_n
    if plan.kind is Kind.RATIO_TRACKING:
        return plan.rate
    if plan.kind is Kind.SINGLE_TERM_POISSON:
        return plan.rate * s.evals_per_draw
    from .roulette import mean_order

    if plan.kind in (Kind.TRUNCATED_SERIES, Kind.UBK):
        return mean_order(plan.roulette) * s.evals_per_draw * plan.repeats
    if plan.kind is Kind.UNBIASED_MARCHING:
        return (mean_order(plan.roulette) + 1) * s.evals_per_draw + 2 * s.endpoint_matching
    return s.evals_per_draw + 2 * s.endpoint_matching

