"""Throughput comparison of the compiled and pure-Python trial kernels."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _backend
from .density import Fractal2DSlice, Interval, SineSum
from .estimators import EstimatorSpec, resolve, run_trials

__all__ = ["BenchResult", "CASES", "run_bench"]

_SINE = SineSum(((0.8, 9.0, 0.2), (0.4, 23.0, 1.3)), 2.0)

CASES = {
    "ratio_tracking": (EstimatorSpec("ratio_tracking"), _SINE),
    "bk": (EstimatorSpec("bk"), _SINE),
    "pseries_cmf": (EstimatorSpec("pseries_cmf"), _SINE),
    "unbiased_ray_marching": (EstimatorSpec("unbiased_ray_marching"), _SINE),
    "biased_ray_marching/fractal": (EstimatorSpec("biased_ray_marching"), Fractal2DSlice(scale=6.0)),
}


@dataclass(frozen=True)
class BenchResult:
    case: str
    backend: str
    trials: int
    seconds: float

    @property
    def rate(self) -> float:
        return self.trials / self.seconds if self.seconds > 0 else float("inf")


def run_bench(trials: int = 20_000, cases=None, repeat: int = 3) -> list[BenchResult]:
    """Best-of-``repeat`` wall time per case and backend; also checks the outputs agree."""
    out = []
    interval = Interval()
    for name in cases or CASES:
        spec, field = CASES[name]
        plan = resolve(spec, field, interval)
        ref = None
        for backend in _backend.available():
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                values, _ = run_trials(plan, field, interval, trials, seed=1, backend=backend)
                best = min(best, time.perf_counter() - t0)
            if ref is None:
                ref = values
            elif not np.array_equal(ref, values):
                raise AssertionError(f"{name}: backends disagree")
            out.append(BenchResult(name, backend, trials, best))
    return out


def format_table(results: list[BenchResult]) -> str:
    lines = [f"{'case':30s} {'backend':9s} {'trials/s':>12s} {'speedup':>8s}"]
    base = {r.case: r.rate for r in results if r.backend == "python"}
    for r in results:
        speed = r.rate / base[r.case] if r.case in base else float("nan")
        lines.append(f"{r.case:30s} {r.backend:9s} {r.rate:12.0f} {speed:8.1f}")
    return "\n".join(lines)
