"""Closed-form variance and cost oracles, and the efficiency metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

from .density import Interval
from .roulette import RouletteSpec, bk_expected_order, evaluation_probabilities

__all__ = [
    "EfficiencyReport",
    "SeriesDivergence",
    "cost_bk",
    "cost_delta_tracking",
    "cost_formulas",
    "cost_johnson",
    "cost_rrt",
    "efficiency",
    "product_variance",
    "roulette_weighted_variance",
    "var_bk_fixed_optimal",
    "var_bk_uniform",
    "var_delta_tracking",
    "var_johnson",
    "var_rrt",
    "var_ubk_optimal",
]

SERIES_RTOL = 1e-14
SERIES_CAP = 100_000


class SeriesDivergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class EfficiencyReport:
    variance: float
    cost: float
    efficiency: float
    inverse_efficiency: float
    infinite: bool = False


def efficiency(variance: float, cost: float) -> EfficiencyReport:
    """Reciprocal of variance times cost; zero variance is flagged as infinite."""
    if not cost > 0:
        raise ValueError("cost must be positive")
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0:
        return EfficiencyReport(0.0, cost, math.inf, 0.0, True)
    inv = variance * cost
    return EfficiencyReport(variance, cost, 1.0 / inv, inv)


def var_delta_tracking(tau: float) -> float:
    return math.exp(-tau) - math.exp(-2.0 * tau)


def var_johnson(tau: float, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(-2.0 * tau) * math.expm1(tau / n)


def var_rrt(field, interval: Interval, majorant: float, control: float, tau: float | None = None) -> float:
    """Residual ratio tracking variance for constant majorant and control."""
    ell = interval.length
    lam = (majorant - control) * ell
    tau_bar = majorant * ell
    if tau is None:
        from .density import exact_optical_depth

        tau = exact_optical_depth(field, interval)
    V, _ = integrate.quad(lambda x: (ell * (majorant - field(x))) ** 2, interval.a, interval.b,
                          epsabs=1e-13, epsrel=1e-12, limit=500)
    V /= ell
    if lam <= 0:
        if V > 0 and not math.isclose(tau_bar, tau):
            raise ValueError("zero tracking rate with a nonzero residual")
        return 0.0
    return math.exp(-2.0 * tau_bar + lam + V / lam) - math.exp(-2.0 * tau)


def cost_rrt(tau_bar_r: float, M: int = 1) -> float:
    return M * tau_bar_r


def cost_delta_tracking(tau_bar: float, tau: float, M: int = 1) -> float:
    if tau == 0:
        return M * tau_bar
    return M * tau_bar * -math.expm1(-tau) / tau


def cost_johnson(tau_bar: float, n: int, M: int = 1) -> float:
    return M * tau_bar * n


def cost_bk(c: float) -> float:
    return bk_expected_order(RouletteSpec(c))


def cost_formulas(kind: str, **params) -> float:
    """Dispatch by name: ``rrt``, ``delta_tracking``, ``johnson`` or ``bk``."""
    table = {
        "rrt": cost_rrt,
        "delta_tracking": cost_delta_tracking,
        "johnson": cost_johnson,
        "bk": cost_bk,
    }
    try:
        fn = table[kind]
    except KeyError:
        raise ValueError(f"no cost formula for {kind!r}") from None
    return fn(**params)


def _sum_series(term, what: str, start: int = 0) -> float:
    # no convergence test before ``start``: terms there may be exactly zero
    total = 0.0
    for j in range(SERIES_CAP):
        try:
            t = term(j)
        except OverflowError:
            break
        total += t
        if j > start and abs(t) <= SERIES_RTOL * abs(total):
            return total
        if not math.isfinite(total):
            break
    raise SeriesDivergence(f"series for {what} did not converge")


def _pochhammer_ratio(c: float, K: int, j: int) -> float:
    """Pr[N >= K + j] for plain BK roulette (clamped continuation)."""
    q = 1.0
    for i in range(K + 1, K + j + 1):
        q *= min(c / i, 1.0)
    return q


def var_bk_uniform(tau: float, tau_c: float, c: float, K: int | None = None) -> float:
    """BK roulette variance when Y = tau_c - tau has no variance (uniform medium).

    Sums ``Pr[N = K + j] * T_j^2`` over truncation depths ``j``, where
    ``T_j`` is the estimate returned when the series stops at ``K + j``.
    """
    K = math.floor(c) if K is None else K
    Y = tau_c - tau
    partial = sum(Y**n / math.factorial(n) for n in range(K + 1))
    # running order-(K+j) contribution Y^(K+j) / ((K+j)! Pr[N >= K+j])
    state = {"partial": partial, "q": 1.0, "t": Y**K / math.factorial(K)}

    def term(j):
        if j > 0:
            i = K + j
            cont = min(c / i, 1.0)
            state["q"] *= cont
            state["t"] = state["t"] * Y / (i * cont) if cont > 0 else 0.0
            state["partial"] += state["t"]
        stop = 1.0 - min(c / (K + j + 1), 1.0)
        return state["q"] * stop * state["partial"] ** 2

    start = max(0, math.ceil(c) - K)
    second = math.exp(-2.0 * tau_c) * _sum_series(term, f"BK variance (tau={tau}, c={c}, K={K})", start)
    return second - math.exp(-2.0 * tau)


def var_bk_fixed_optimal(tau: float, EY2: float, N: int) -> float:
    """Fixed-order BK at the optimal pivot; the biased mean is taken as e^-tau."""
    return math.exp(-2.0 * tau) * sum(EY2**k / math.factorial(k) ** 2 for k in range(1, N + 1))


def var_ubk_optimal(tau: float, EY2: float, N: int | None = None, roulette: RouletteSpec | None = None) -> float:
    """U-statistics series variance at the optimal pivot.

    With a fixed order ``N`` this is the binomially reduced sum; with a
    ``roulette`` the second moment is summed over truncation depths.
    """
    if (N is None) == (roulette is None):
        raise ValueError("give exactly one of N or roulette")
    if N is not None:
        return math.exp(-2.0 * tau) * sum(
            EY2**k / (math.comb(N, k) * math.factorial(k) ** 2) for k in range(1, N + 1)
        )
    c, K = roulette.c, roulette.K

    def term(j):
        n_top = K + j
        q = _pochhammer_ratio(c, K, j)
        stop = 1.0 - min(c / (n_top + 1), 1.0)
        inner = sum(EY2**n / (math.factorial(n) ** 2 * math.comb(n_top, n)) for n in range(K + 1))
        for i in range(1, j + 1):
            inner += c ** (-2 * i) * EY2 ** (K + i) / (math.factorial(K) ** 2 * math.comb(n_top, K + i))
        return q * stop * inner

    start = max(0, math.ceil(c) - K)
    second = math.exp(-2.0 * tau) * _sum_series(term, f"U-BK variance (c={c}, K={K})", start)
    return second - math.exp(-2.0 * tau)


def roulette_weighted_variance(mean: float, variance: float, p: float) -> float:
    """p * Var[R X / p] = Var[X] + (1 - p) E[X]^2 for survival probability p."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    return variance + (1.0 - p) * mean**2


def product_variance(second_moment: float, mean: float, k: int) -> float:
    """Var of a product of k iid factors: E[Y^2]^k - E[Y]^(2k)."""
    return second_moment**k - mean ** (2 * k)


def series_weights(roulette: RouletteSpec, upto: int) -> list[float]:
    return [1.0 / p for p in evaluation_probabilities(roulette, upto)]
