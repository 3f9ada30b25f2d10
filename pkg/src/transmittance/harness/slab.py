"""Image scenario: one ray per pixel through a 2-D fractal slab.

Pixel ``(r, c)`` of an ``R x R`` image looks through the column
``x = (c + 0.5) / R``; the density scale falls linearly from the top row to
zero at the bottom row, and the fractal gain rises from left to right.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..density import Fractal2DSlice, exact_optical_depth, field_stats
from ..estimators import resolve, run_trials
from .runner import Row, ScenarioResult, SummaryStats, _key, summarize

__all__ = ["pixel_field", "run_slab"]

DEFAULTS = {"resolution": 128, "max_scale": 20.0, "seed": 1, "octaves": 6}


def pixel_field(r: int, c: int, resolution: int, max_scale: float = 20.0, seed: int = 1,
                octaves: int = 6) -> Fractal2DSlice:
    y = 1.0 - r / (resolution - 1) if resolution > 1 else 1.0
    x = (c + 0.5) / resolution
    return Fractal2DSlice(octaves=octaves, gain=0.35 + 0.4 * x, seed=seed,
                          scale=max_scale * y, column=x)


def _mean_stats(stats: list[SummaryStats]) -> SummaryStats:
    n = len(stats)
    var = sum(s.variance for s in stats) / n
    cost = sum(s.mean_cost for s in stats) / n
    return SummaryStats(
        mean=sum(s.mean for s in stats) / n,
        variance=var,
        mse=sum(s.mse for s in stats) / n,
        std_error=math.sqrt(sum(s.std_error**2 for s in stats)) / n,
        mean_cost=cost,
        efficiency=math.inf if var == 0 or cost == 0 else 1.0 / (var * cost),
        trials=sum(s.trials for s in stats),
    )


def run_slab(cfg, result: ScenarioResult, workers: int = 1, backend: str | None = None) -> None:
    opts = {**DEFAULTS, **cfg.slab}
    R = int(opts["resolution"])
    if R < 1:
        raise ValueError("slab resolution must be positive")
    interval = cfg.interval
    fields = [pixel_field(r, c, R, float(opts["max_scale"]), int(opts["seed"]), int(opts["octaves"]))
              for r in range(R) for c in range(R)]
    taus = [exact_optical_depth(f, interval) for f in fields]
    stats = [field_stats(f, interval) for f in fields]

    for e_idx, entry in enumerate(cfg.estimators):
        plans = [resolve(entry.spec, f, interval, s) for f, s in zip(fields, stats)]

        def pixel(i, e_idx=e_idx, plans=plans):
            v, ev = run_trials(plans[i], fields[i], interval, cfg.trials, seed=cfg.seed,
                               key=_key(cfg.name, e_idx, i), backend=backend)
            return summarize(v, ev, math.exp(-taus[i]))

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_pixel = list(pool.map(pixel, range(len(fields))))
        else:
            per_pixel = [pixel(i) for i in range(len(fields))]

        result.images[entry.spec.label] = np.array(
            [s.variance for s in per_pixel]).reshape(R, R)
        for r in range(R):
            row = per_pixel[r * R:(r + 1) * R]
            ref = sum(math.exp(-t) for t in taus[r * R:(r + 1) * R]) / R
            result.rows.append(Row(cfg.name, entry.spec.label, "row", float(r),
                                   _mean_stats(row), ref))
