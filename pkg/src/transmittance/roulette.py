"""Series-order selection and the closed-form costs that go with it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "RouletteSpec",
    "RouletteOutcome",
    "aggressive_roulette",
    "bk_expected_order",
    "bk_truncation_prob",
    "cmf99_order",
    "cmf_expected_samples",
    "evaluation_probabilities",
    "mean_order",
    "tuple_size",
    "UNBIASED_MARCHING_ROULETTE",
]

_SERIES_RTOL = 1e-16
_SERIES_CAP = 100_000


@dataclass(frozen=True)
class RouletteSpec:
    """Bhanot-Kennedy roulette with an extra zero-order stop.

    ``K`` orders are kept with probability ``1 - p_zero``; order ``i > K`` then
    survives with conditional probability ``min(c / i, 1)``.  ``c = 0`` gives a
    deterministic truncation at ``K``.
    """

    c: float
    K: int | None = None
    p_zero: float = 0.0

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError("roulette c must be finite and nonnegative")
        if self.K is None:
            object.__setattr__(self, "K", math.floor(self.c))
        if self.K < 0:
            raise ValueError("guaranteed order K must be nonnegative")
        if not 0.0 <= self.p_zero < 1.0:
            raise ValueError("p_zero must lie in [0, 1)")

    @classmethod
    def fixed(cls, n: int) -> "RouletteSpec":
        return cls(c=0.0, K=n)


UNBIASED_MARCHING_ROULETTE = RouletteSpec(c=2.0, K=2, p_zero=0.9)


@dataclass(frozen=True)
class RouletteOutcome:
    order: int
    weights: list[float] = field(default_factory=lambda: [1.0])


def aggressive_roulette(spec: RouletteSpec, u: float) -> RouletteOutcome:
    """Inverse-CDF order sample driven by a single uniform ``u``."""
    w = [1.0]
    P = 1.0 - spec.p_zero
    if P <= u:
        return RouletteOutcome(0, w)
    inv = 1.0 / P
    w.extend([inv] * spec.K)
    i = spec.K + 1
    while True:
        P *= min(spec.c / i, 1.0)
        if P <= u:
            return RouletteOutcome(i - 1, w)
        w.append(1.0 / P)
        i += 1


def evaluation_probabilities(spec: RouletteSpec, upto: int) -> list[float]:
    """P_k = Pr[N >= k] for k = 0..upto."""
    out = [1.0]
    P = 1.0 - spec.p_zero
    for k in range(1, upto + 1):
        if k > spec.K:
            P *= min(spec.c / k, 1.0)
        out.append(P)
    return out


def bk_truncation_prob(c: float, K: int, N: int) -> float:
    """Probability of evaluating order N under plain BK roulette."""
    if N < 0:
        raise ValueError("order must be nonnegative")
    if N <= K:
        return 1.0
    q = 1.0
    for i in range(K + 1, N + 1):
        q *= min(c / i, 1.0)
    return q


def bk_expected_order(spec: RouletteSpec) -> float:
    """E[N] of the roulette.

    With the default ``K = floor(c)`` this is the closed form
    ``K + K!/c^K (e^c - sum_{k<=K} c^k/k!)``; any other ``K`` is summed
    directly from the survival probabilities.
    """
    c, K = spec.c, spec.K
    if c <= 0:
        raise ValueError("roulette parameter c must be positive")
    if K == math.floor(c):
        t = 1.0
        s = 1.0
        for k in range(1, K + 1):
            t = t * c / k
            s = s + t
        return (1.0 - spec.p_zero) * (K + (math.exp(c) - s) / t)
    total = float(K)
    q = 1.0
    for i in range(K + 1, K + _SERIES_CAP):
        q *= min(c / i, 1.0)
        total += q
        if q < _SERIES_RTOL * total:
            return (1.0 - spec.p_zero) * total
    raise ArithmeticError(f"expected order did not converge for c={c}, K={K}")


def mean_order(spec: RouletteSpec) -> float:
    """E[N] for any spec, including deterministic truncation (c = 0)."""
    if spec.c == 0:
        return (1.0 - spec.p_zero) * spec.K
    return bk_expected_order(spec)


def cmf_expected_samples(tau_bar: float) -> int:
    """Cubic fit to the p-series CMF sample count."""
    if tau_bar < 0:
        raise ValueError("optical thickness must be nonnegative")
    return math.ceil(((0.015 + tau_bar) * (0.65 + tau_bar) * (60.3 + tau_bar)) ** (1.0 / 3.0))


def tuple_size(tau_bar: float, roulette: RouletteSpec = UNBIASED_MARCHING_ROULETTE) -> int:
    """Comb size that makes unbiased marching cost as much as the p-series CMF."""
    n_cmf = cmf_expected_samples(tau_bar)
    n_bk = bk_expected_order(roulette)
    return max(1, math.floor(n_cmf / (n_bk + 1.0) + 0.5))


def cmf99_order(tau_bar: float, mass: float = 0.99) -> int:
    """Smallest K whose Poisson(tau_bar) CMF reaches ``mass``."""
    if tau_bar < 0:
        raise ValueError("optical thickness must be nonnegative")
    if tau_bar == 0:
        return 0
    # log-domain running term keeps large tau_bar from underflowing e^-tau
    log_term = -tau_bar
    log_cmf = log_term
    k = 0
    target = math.log(mass)
    while log_cmf < target:
        k += 1
        log_term += math.log(tau_bar / k)
        log_cmf = log_cmf + math.log1p(math.exp(log_term - log_cmf))
    return k
