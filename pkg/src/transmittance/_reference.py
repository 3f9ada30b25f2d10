"""Pure-Python trial kernels.

These are the semantic reference for the compiled kernels: the same
variates are consumed in the same order and every floating-point operation
is written out in the same sequence, so both backends produce identical bits.
"""

from __future__ import annotations

import math

import numpy as np

from ._plan import Kind, Plan
from .density import evaluate
from .depth import EndpointCache, comb_value, draw_value
from .symmetric import SymmetricMeansAccumulator


def _roulette(roulette, u):
    w = [1.0]
    P = 1.0 - roulette.p_zero
    if P <= u:
        return 0, w
    inv = 1.0 / P
    for _ in range(roulette.K):
        w.append(inv)
    i = roulette.K + 1
    while True:
        P *= min(roulette.c / i, 1.0)
        if P <= u:
            return i - 1, w
        w.append(1.0 / P)
        i += 1


def delta_tracking(plan, field, rng, counter):
    maj = plan.majorant
    if maj == 0.0:
        return 1.0
    x = plan.a
    while True:
        x += -math.log1p(-rng.random()) / maj
        if x >= plan.b:
            return 1.0
        u = rng.random()
        if u * maj < evaluate(field, x, counter):
            return 0.0


def johnson(plan, field, rng, counter):
    maj = plan.majorant
    n = plan.johnson_n
    total = 0
    if maj > 0.0:
        for _ in range(n):
            x = plan.a
            while True:
                x += -math.log1p(-rng.random()) / maj
                if x >= plan.b:
                    break
                u = rng.random()
                if u * maj < evaluate(field, x, counter):
                    total += 1
    return math.pow(1.0 - 1.0 / n, total)


def ratio_tracking(plan, field, rng, counter):
    ell = plan.b - plan.a
    ctrl = plan.control
    T = math.exp(-ctrl * ell)
    if plan.rate == 0.0:
        return T
    mr = plan.rate / ell
    x = plan.a
    while True:
        x += -math.log1p(-rng.random()) / mr
        if x >= plan.b:
            return T
        T *= 1.0 - (evaluate(field, x, counter) - ctrl) / mr


def single_term_poisson(plan, field, rng, counter):
    ell = plan.b - plan.a
    lam = plan.rate
    cache = EndpointCache()
    prod = 1.0
    s = 0.0
    while True:
        s += -math.log1p(-rng.random())
        if s >= lam:
            break
        y = draw_value(field, plan.a, ell, plan.sampler, rng, counter, cache)
        prod *= y / lam
    return math.exp(lam - plan.control * ell) * prod


def truncated_series(plan, field, rng, counter):
    ell = plan.b - plan.a
    N, w = _roulette(plan.roulette, rng.random())
    cache = EndpointCache()
    s = 1.0
    prod = 1.0
    for k in range(1, N + 1):
        y = draw_value(field, plan.a, ell, plan.sampler, rng, counter, cache)
        prod *= y / k
        s += prod * w[k]
    return math.exp(-plan.control * ell) * s


def _series_sum(m, w, N):
    s = 1.0
    inv = 1.0
    for k in range(1, N + 1):
        inv /= k
        s += m[k] * w[k] * inv
    return s


def ubk(plan, field, rng, counter):
    ell = plan.b - plan.a
    N, w = _roulette(plan.roulette, rng.random())
    cache = EndpointCache()
    acc = SymmetricMeansAccumulator(N)
    for _ in range(N):
        acc.push(draw_value(field, plan.a, ell, plan.sampler, rng, counter, cache))
    return math.exp(-plan.control * ell) * _series_sum(acc.m, w, N)


def unbiased_marching(plan, field, rng, counter):
    ell = plan.b - plan.a
    N, w = _roulette(plan.roulette, rng.random())
    cache = EndpointCache()
    xs = [comb_value(field, plan.a, ell, plan.sampler, rng.random(), counter, cache)
          for _ in range(N + 1)]
    T = 0.0
    for j in range(N + 1):
        xj = xs[j]
        acc = SymmetricMeansAccumulator(N)
        for i in range(N + 1):
            if i != j:
                acc.push(xs[i] - xj)
        v = math.exp(xj) * _series_sum(acc.m, w, N)
        T += (v - T) / (j + 1)
    return T


def biased_marching(plan, field, rng, counter):
    ell = plan.b - plan.a
    X = comb_value(field, plan.a, ell, plan.sampler, rng.random(), counter, EndpointCache())
    return math.exp(X)


def depth(plan, field, rng, counter):
    ell = plan.b - plan.a
    return draw_value(field, plan.a, ell, plan.sampler, rng, counter, EndpointCache())


KERNELS = {
    Kind.DELTA_TRACKING: delta_tracking,
    Kind.JOHNSON: johnson,
    Kind.RATIO_TRACKING: ratio_tracking,
    Kind.SINGLE_TERM_POISSON: single_term_poisson,
    Kind.TRUNCATED_SERIES: truncated_series,
    Kind.UBK: ubk,
    Kind.UNBIASED_MARCHING: unbiased_marching,
    Kind.BIASED_MARCHING: biased_marching,
    Kind.DEPTH: depth,
}


class _Tally:
    __slots__ = ("count",)

    def __init__(self):
        self.count = 0


def run_trial(plan: Plan, field, rng, counter) -> float:
    kernel = KERNELS[plan.kind]
    if plan.repeats == 1:
        return kernel(plan, field, rng, counter)
    mean = 0.0
    for r in range(plan.repeats):
        mean += (kernel(plan, field, rng, counter) - mean) / (r + 1)
    return mean


def run_block(plan: Plan, field, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    values = np.empty(n, dtype=np.float64)
    evals = np.empty(n, dtype=np.int64)
    tally = _Tally()
    for t in range(n):
        before = tally.count
        values[t] = run_trial(plan, field, rng, tally)
        evals[t] = tally.count - before
    return values, evals
