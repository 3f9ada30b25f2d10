"""Estimates of negative (residual) optical depth from M density lookups.

Points live in a primary coordinate ``t`` in [0, 1].  Without a warp,
``x = a + t * l`` and the primary-domain integrand is ``g(t) = mu(x) * l``;
with a warp, ``g(t) = mu(x) / pdf(x)``.  Either way the integral of ``g``
over [0, 1] is the optical depth, and an estimate is ``X = -mean g(t_j)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import EvalCounter, Interval, WarpMap, evaluate

__all__ = [
    "Pattern",
    "DepthSamplerSpec",
    "DepthEstimate",
    "EndpointCache",
    "SamplingSupportError",
    "check_support",
    "comb_estimate",
    "estimate_variance",
    "iid_estimate",
]

# fractional part of the golden ratio
GOLDEN = 0.6180339887498949


class SamplingSupportError(ValueError):
    """The sampling PDF vanishes where the residual density does not."""


class Pattern(enum.IntEnum):
    IID = 0
    EQUIDISTANT = 1
    GOLDEN = 2
    MIRRORED = 3

    @classmethod
    def parse(cls, name) -> "Pattern":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "iid": cls.IID,
            "equidistant": cls.EQUIDISTANT,
            "equidistantcomb": cls.EQUIDISTANT,
            "comb": cls.EQUIDISTANT,
            "golden": cls.GOLDEN,
            "goldencomb": cls.GOLDEN,
            "mirrored": cls.MIRRORED,
            "mirroredcomb": cls.MIRRORED,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown sampling pattern {name!r}") from None


@dataclass(frozen=True)
class DepthSamplerSpec:
    M: int = 1
    pattern: Pattern = Pattern.IID
    endpoint_matching: bool = False
    warp: WarpMap | None = None
    control: float = 0.0
    # match the warped integrand's endpoints (True) or mu(a), mu(b) directly
    epm_warped: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern.parse(self.pattern))
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("query size M must be a positive integer")
        object.__setattr__(self, "M", int(self.M))
        if not math.isfinite(self.control):
            raise ValueError("control density must be finite")
        if self.endpoint_matching and self.pattern in (Pattern.IID, Pattern.MIRRORED):
            raise ValueError(f"endpoint matching is not defined for {self.pattern.name} sampling")

    @property
    def evals_per_draw(self) -> int:
        if self.pattern is Pattern.MIRRORED:
            return 2 * ((self.M + 1) // 2)
        return self.M

    @property
    def variates_per_draw(self) -> int:
        return self.M if self.pattern is Pattern.IID else 1


@dataclass(frozen=True)
class DepthEstimate:
    value: float
    evals_used: int


class EndpointCache:
    """Endpoint integrand values, evaluated once per transmittance estimate."""

    __slots__ = ("g0", "g1", "ready")

    def __init__(self):
        self.ready = False
        self.g0 = self.g1 = 0.0


def check_support(field, interval: Interval, spec: DepthSamplerSpec) -> None:
    warp = spec.warp
    if warp is None:
        return
    if (warp.a, warp.b) != (interval.a, interval.b):
        raise ValueError("warp was built for a different interval")
    cell = warp.cell
    for i, m in enumerate(warp.masses):
        if m == 0.0:
            # the control is integrated analytically, so only mu itself needs support
            _, hi = field.bounds(warp.a + i * cell, warp.a + (i + 1) * cell)
            if hi > 0.0:
                raise SamplingSupportError(
                    f"warp cell {i} has zero probability but the density there is up to {hi}"
                )


def _g(field, a, ell, warp, t, counter):
    if warp is None:
        return evaluate(field, a + t * ell, counter) * ell
    x, pdf = warp.sample(t)
    return evaluate(field, x, counter) / pdf


def _endpoints(field, a, ell, spec, counter, cache):
    if cache is not None and cache.ready:
        return cache.g0, cache.g1
    if spec.epm_warped:
        g0 = _g(field, a, ell, spec.warp, 0.0, counter)
        g1 = _g(field, a, ell, spec.warp, 1.0, counter)
    else:
        g0 = evaluate(field, a, counter) * ell
        g1 = evaluate(field, a + ell, counter) * ell
    if cache is not None:
        cache.g0, cache.g1, cache.ready = g0, g1, True
    return g0, g1


def iid_value(field, a, ell, spec, us, counter):
    mean = 0.0
    for j in range(spec.M):
        g = _g(field, a, ell, spec.warp, us[j], counter)
        mean += (g - mean) / (j + 1)
    return -mean + spec.control * ell


def comb_value(field, a, ell, spec, u, counter, cache=None):
    M = spec.M
    warp = spec.warp
    mean = 0.0
    pattern = spec.pattern
    if pattern is Pattern.EQUIDISTANT:
        for j in range(M):
            g = _g(field, a, ell, warp, (u + j) / M, counter)
            mean += (g - mean) / (j + 1)
        X = -mean
        if spec.endpoint_matching:
            g0, g1 = _endpoints(field, a, ell, spec, counter, cache)
            X = X - (0.5 - u) * (g1 - g0) / M
    elif pattern is Pattern.GOLDEN:
        shift = 0.0
        for j in range(M):
            t = u + j * GOLDEN
            t -= math.floor(t)
            g = _g(field, a, ell, warp, t, counter)
            mean += (g - mean) / (j + 1)
            shift += 0.5 - t
        X = -mean
        if spec.endpoint_matching:
            g0, g1 = _endpoints(field, a, ell, spec, counter, cache)
            X = X - (g1 - g0) * (shift / M)
    elif pattern is Pattern.MIRRORED:
        h = (M + 1) // 2
        for j in range(h):
            t = (u + j) / h
            g = 0.5 * (_g(field, a, ell, warp, t, counter) + _g(field, a, ell, warp, 1.0 - t, counter))
            mean += (g - mean) / (j + 1)
        X = -mean
    else:
        raise ValueError("comb estimate needs a comb pattern")
    return X + spec.control * ell


def draw_value(field, a, ell, spec, rng, counter, cache=None):
    """One residual estimate, consuming variates from ``rng``."""
    if spec.pattern is Pattern.IID:
        us = [rng.random() for _ in range(spec.M)]
        return iid_value(field, a, ell, spec, us, counter)
    return comb_value(field, a, ell, spec, rng.random(), counter, cache)


def _run(field, interval, spec, counter, fn):
    check_support(field, interval, spec)
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    value = fn(counter)
    return DepthEstimate(value, counter.count - before)


def iid_estimate(field, interval: Interval, spec: DepthSamplerSpec, u_stream: Sequence[float],
                 counter: EvalCounter | None = None) -> DepthEstimate:
    """``-(1/M) sum mu_r(x_i) / p(x_i)`` at ``M`` independent points."""
    if spec.pattern is not Pattern.IID:
        raise ValueError("iid_estimate needs the IID pattern")
    if len(u_stream) < spec.M:
        raise ValueError(f"need {spec.M} variates, got {len(u_stream)}")
    return _run(field, interval, spec, counter,
                lambda c: iid_value(field, interval.a, interval.length, spec, u_stream, c))


def comb_estimate(field, interval: Interval, spec: DepthSamplerSpec, u: float,
                  counter: EvalCounter | None = None,
                  endpoints: EndpointCache | None = None) -> DepthEstimate:
    """Randomly shifted comb of ``M`` lookups, optionally endpoint matched."""
    return _run(field, interval, spec, counter,
                lambda c: comb_value(field, interval.a, interval.length, spec, u, c, endpoints))


def estimate_variance(field, interval: Interval, spec: DepthSamplerSpec, trials: int,
                      seed: int = 0, backend: str | None = None) -> float:
    """Unbiased sample variance of independent estimates."""
    if trials < 2:
        raise ValueError("need at least two trials")
    from .estimators import EstimatorSpec, run_trials

    est = EstimatorSpec("depth", sampler=spec)
    values, _ = run_trials(est, field, interval, trials, seed=seed, backend=backend)
    return float(np.var(values, ddof=1))
