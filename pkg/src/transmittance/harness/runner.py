"""Scenario execution, summary statistics and oracle gating."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .. import analytics
from ..density import Constant, Interval, exact_optical_depth, field_stats
from ..estimators import BLOCK_SIZE, EstimatorSpec, Kind, resolve, run_trials
from ..roulette import RouletteSpec, cmf_expected_samples, mean_order
from .config import EstimatorEntry, ScenarioConfig

__all__ = [
    "GATE_TOLERANCE",
    "Row",
    "ScenarioResult",
    "SummaryStats",
    "apply_sweep",
    "oracle_variance",
    "run_scenario",
    "summarize",
    "tau_for_budget",
]

GATE_TOLERANCE = 0.05
# auto-raise trials until std_error / |mean| drops below this (or max_trials)
TARGET_REL_SE = 1e-3


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    variance: float
    mse: float
    std_error: float
    mean_cost: float
    efficiency: float
    trials: int


@dataclass(frozen=True)
class Row:
    scenario: str
    estimator: str
    sweep_param: str
    sweep_value: float | None
    stats: SummaryStats
    reference_T: float
    oracle_variance: float | None = None
    gated: bool = False

    @property
    def oracle_ok(self) -> bool | None:
        if self.oracle_variance is None or not self.gated:
            return None
        o, v = self.oracle_variance, self.stats.variance
        if abs(o) < 1e-12:
            return v < 1e-12
        return abs(v / o - 1.0) <= GATE_TOLERANCE


@dataclass
class ScenarioResult:
    name: str
    rows: list[Row] = field(default_factory=list)
    images: dict[str, np.ndarray] = field(default_factory=dict)
    error: str | None = None

    @property
    def failures(self) -> list[str]:
        out = [f"{self.name}: {self.error}"] if self.error else []
        for r in self.rows:
            if r.oracle_ok is False:
                out.append(
                    f"{r.scenario}/{r.estimator} {r.sweep_param}={r.sweep_value}: variance "
                    f"{r.stats.variance:.6g} vs oracle {r.oracle_variance:.6g}"
                )
        return out

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def summarize(values: np.ndarray, evals: np.ndarray, reference_T: float) -> SummaryStats:
    n = len(values)
    mean = float(np.mean(values))
    # identical samples give exactly zero (the two-pass formula leaves rounding residue)
    var = float(np.var(values, ddof=1)) if n > 1 and np.ptp(values) > 0 else 0.0
    mse = float(np.mean((values - reference_T) ** 2))
    cost = float(np.mean(evals))
    eff = math.inf if var == 0 or cost == 0 else 1.0 / (var * cost)
    return SummaryStats(mean, var, mse, math.sqrt(var / n), cost, eff, n)


def tau_for_budget(budget: float) -> float:
    """Control thickness whose p-series CMF sample count equals ``budget``."""
    if budget <= cmf_expected_samples(0.0):
        return 0.0
    target = (budget - 0.5) ** 3

    def f(t):
        return (0.015 + t) * (0.65 + t) * (60.3 + t) - target

    return optimize.brentq(f, 0.0, budget * 2.0 + 10.0, xtol=1e-12)


def _scale_to_tau(prof, interval, tau):
    tau0 = exact_optical_depth(prof, interval)
    if tau0 <= 0:
        raise ValueError("cannot rescale a vacuum field")
    return prof.scaled(tau / tau0)


def sweep_field(param: str, value: float, prof, interval: Interval):
    if param == "tau":
        return _scale_to_tau(prof, interval, value)
    if param == "amplitude":
        if not hasattr(prof, "with_amplitude_scale"):
            raise ValueError("amplitude sweeps need a sine-sum field")
        return prof.with_amplitude_scale(value)
    return prof


def apply_sweep(param: str | None, value: float | None, entry: EstimatorEntry, prof,
                interval: Interval) -> EstimatorSpec:
    spec = entry.spec
    if param is None or param in ("tau", "amplitude"):
        return spec
    ell = interval.length
    marching = spec.kind in ("unbiased_ray_marching", "biased_ray_marching")
    if param == "tau_c":
        return replace(spec, control=value / ell)
    if param == "control":
        return replace(spec, control=value)
    if param == "c":
        p_zero = spec.roulette.p_zero if spec.roulette else 0.0
        return replace(spec, roulette=RouletteSpec(value, math.floor(value), p_zero))
    if param == "M":
        if marching:
            return replace(spec, M=int(value))
        sampler = spec.sampler
        if sampler is None:
            raise ValueError(f"{spec.label}: an M sweep needs a depth sampler")
        return replace(spec, sampler=replace(sampler, M=int(value)))
    if param == "majorant_scale":
        return replace(spec, majorant_scale=value)
    if param == "control_thickness":
        return replace(spec, control_thickness=value)
    if param == "budget":
        tau_b = tau_for_budget(value)
        if spec.kind == "unbiased_ray_marching":
            return replace(spec, control_thickness=tau_b)
        if spec.kind == "biased_ray_marching":
            return replace(spec, M=int(value))
        if spec.kind == "pseries_cmf" and entry.policy == "majorant":
            bound = field_stats(prof, interval).majorant
            return replace(spec, majorant=max(bound, tau_b / ell))
        if spec.kind == "pseries_cmf" and entry.policy == "repeats":
            tight = resolve(replace(spec, repeats=1), prof, interval)
            per = max(mean_order(tight.roulette), 1e-12)
            return replace(spec, repeats=max(1, round(value / per)))
        return spec
    raise ValueError(f"unknown sweep parameter {param!r}")


def oracle_variance(name: str | None, plan, prof, interval: Interval, tau: float) -> float | None:
    if name is None:
        return None
    ell = interval.length
    if name == "delta_tracking":
        return analytics.var_delta_tracking(tau)
    if name == "johnson":
        return analytics.var_johnson(tau, plan.johnson_n)
    if name == "rrt":
        if plan.kind is not Kind.RATIO_TRACKING:
            raise ValueError("the rrt oracle applies to ratio tracking only")
        return analytics.var_rrt(prof, interval, plan.control + plan.rate / ell, plan.control, tau)
    if name == "bk_uniform":
        if not isinstance(prof, Constant) or plan.roulette.p_zero != 0.0:
            raise ValueError("the bk_uniform oracle needs a constant field and plain BK roulette")
        return analytics.var_bk_uniform(tau, plan.control * ell, plan.roulette.c, plan.roulette.K)
    raise ValueError(f"unknown oracle {name!r}")


def _key(name: str, *rest: int) -> tuple[int, ...]:
    return (zlib.crc32(name.encode("utf-8")), *rest)


def _simulate(plan, prof, interval, cfg: ScenarioConfig, key, workers, backend):
    values, evals = run_trials(plan, prof, interval, cfg.trials, seed=cfg.seed, key=key,
                               workers=workers, backend=backend)
    n = cfg.trials
    cap = cfg.max_trials or n
    while n < cap:
        mean = abs(float(np.mean(values)))
        se = float(np.std(values, ddof=1)) / math.sqrt(n)
        if mean > 0 and se / mean < TARGET_REL_SE:
            break
        extra = min(n, cap - n)
        more_v, more_e = run_trials(plan, prof, interval, extra, seed=cfg.seed, key=key,
                                    workers=workers, backend=backend,
                                    first_block=-(-n // BLOCK_SIZE))
        values = np.concatenate([values, more_v])
        evals = np.concatenate([evals, more_e])
        n += extra
    return values, evals


def run_scenario(cfg: ScenarioConfig, workers: int = 1, backend: str | None = None) -> ScenarioResult:
    """Run every estimator at every sweep point.

    Estimator precondition failures abort this scenario (recorded in
    ``error``) without raising.
    """
    result = ScenarioResult(cfg.name)
    try:
        if cfg.slab is not None:
            from .slab import run_slab

            run_slab(cfg, result, workers, backend)
        else:
            _run_grid(cfg, result, workers, backend)
    except (ValueError, ArithmeticError) as exc:
        result.error = str(exc)
    return result


def _run_grid(cfg, result, workers, backend):
    interval = cfg.interval
    points = [(None, None)] if cfg.sweep is None else [(cfg.sweep.param, v) for v in cfg.sweep.values]
    for s_idx, (param, value) in enumerate(points):
        prof = sweep_field(param, value, cfg.field, interval) if param else cfg.field
        tau = exact_optical_depth(prof, interval)
        ref_T = math.exp(-tau)
        stats = field_stats(prof, interval)
        for e_idx, entry in enumerate(cfg.estimators):
            spec = apply_sweep(param, value, entry, prof, interval)
            plan = resolve(spec, prof, interval, stats)
            values, evals = _simulate(plan, prof, interval, cfg, _key(cfg.name, e_idx, s_idx),
                                      workers, backend)
            # depth estimators return the residual tau_c - tau, so that is their reference
            ref = plan.control * interval.length - tau if plan.kind is Kind.DEPTH else ref_T
            oracle = oracle_variance(entry.oracle, plan, prof, interval, tau)
            result.rows.append(Row(
                cfg.name, entry.spec.label, param or "", value,
                summarize(values, evals, ref), ref, oracle,
                gated=oracle is not None and entry.gate,
            ))

