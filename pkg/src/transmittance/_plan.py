"""Fully resolved estimator parameters, shared by both backends."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .depth import DepthSamplerSpec, Pattern
from .roulette import RouletteSpec


class Kind(enum.IntEnum):
    DELTA_TRACKING = 0
    JOHNSON = 1
    RATIO_TRACKING = 2
    SINGLE_TERM_POISSON = 3
    TRUNCATED_SERIES = 4
    UBK = 5
    UNBIASED_MARCHING = 6
    BIASED_MARCHING = 7
    DEPTH = 8


@dataclass(frozen=True)
class Plan:
    kind: Kind
    a: float
    b: float
    majorant: float = 0.0
    control: float = 0.0
    # total Poisson rate (lambda) for ratio tracking and the single-term estimator
    rate: float = 0.0
    johnson_n: int = 1
    roulette: RouletteSpec = RouletteSpec(0.0, 0)
    sampler: DepthSamplerSpec = DepthSamplerSpec()
    repeats: int = 1

    @property
    def length(self) -> float:
        return self.b - self.a

    def pack(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.sampler
        ints = np.array(
            [
                int(self.kind), s.M, int(s.pattern), int(s.endpoint_matching),
                int(s.epm_warped), self.roulette.K, self.johnson_n, self.repeats,
                0 if s.warp is None else s.warp.n,
            ],
            dtype=np.int64,
        )
        floats = np.array(
            [self.a, self.b, self.majorant, self.control, self.rate,
             self.roulette.c, self.roulette.p_zero, s.control],
            dtype=np.float64,
        )
        return ints, floats


__all__ = ["Kind", "Plan", "Pattern"]
