"""Elementary symmetric means m_k = e_k(x) / C(N, k).

Three routes to the same numbers: exhaustive subset enumeration (the
oracle), the Girard-Newton power-sum recurrence, and a streaming update that
only ever forms convex-like combinations of previous means.
"""

from __future__ import annotations

import decimal
import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "GN_DIGITS",
    "NAIVE_LIMIT",
    "SymmetricMeansAccumulator",
    "means_exact",
    "means_girard_newton",
    "means_incremental",
    "means_naive",
]

NAIVE_LIMIT = 20
# working precision of the default Girard-Newton path
GN_DIGITS = 60


def _order(n: int, Z: int | None) -> int:
    if Z is None:
        return n
    if not 0 <= Z <= n:
        raise ValueError(f"order Z={Z} must lie in [0, {n}]")
    return Z


def means_naive(xs: Sequence[float], Z: int | None = None) -> list[float]:
    """Enumerate every k-subset; exact up to one correctly rounded sum per order."""
    xs = [float(x) for x in xs]
    n = len(xs)
    if n > NAIVE_LIMIT:
        raise ValueError(f"enumeration refused for N={n} > {NAIVE_LIMIT}")
    Z = _order(n, Z)
    out = [1.0]
    for k in range(1, Z + 1):
        s = math.fsum(math.prod(c) for c in itertools.combinations(xs, k))
        out.append(s / math.comb(n, k))
    return out


def means_exact(xs: Sequence[float], Z: int | None = None) -> list[Fraction]:
    """Rational-arithmetic reference, usable for any N."""
    xs = [Fraction(x) for x in xs]
    n = len(xs)
    Z = _order(n, Z)
    e = [Fraction(1)] + [Fraction(0)] * Z
    for i, x in enumerate(xs, 1):
        for k in range(min(i, Z), 0, -1):
            e[k] += e[k - 1] * x
    return [e[k] / math.comb(n, k) for k in range(Z + 1)]


def means_girard_newton(xs: Sequence[float], Z: int | None = None, compensated: bool = True) -> list[float]:
    """Means from power sums via Newton's identities.

    The alternating recurrence cancels catastrophically once the inputs
    spread over a few orders of magnitude, so by default it runs in
    ``GN_DIGITS``-digit decimal arithmetic.  ``compensated=False`` gives the
    textbook double-precision version.
    """
    xs = [float(x) for x in xs]
    n = len(xs)
    Z = _order(n, Z)
    if not compensated:
        return _girard_newton(xs, Z, 0.0, 1.0)
    with decimal.localcontext() as ctx:
        ctx.prec = GN_DIGITS
        e = _girard_newton([decimal.Decimal(x) for x in xs], Z, decimal.Decimal(0), decimal.Decimal(1))
    return [float(v) for v in e]


def _girard_newton(xs, Z, zero, one):
    n = len(xs)
    power = [zero] * (Z + 1)
    for x in xs:
        p = one
        for i in range(1, Z + 1):
            p *= x
            power[i] += p
    e = [one] + [zero] * Z
    for k in range(1, Z + 1):
        acc = zero
        for i in range(1, k + 1):
            term = e[k - i] * power[i]
            acc = acc + term if i % 2 else acc - term
        e[k] = acc / k
    return [e[k] / math.comb(n, k) for k in range(Z + 1)]


class SymmetricMeansAccumulator:
    """Streaming form of the incremental recurrence.

    >>> acc = SymmetricMeansAccumulator(3)
    >>> for x in (1.0, 2.0, 3.0):
    ...     acc.push(x)
    >>> acc.means[:3]
    [1.0, 2.0, 3.6666666666666665]
    """

    __slots__ = ("Z", "n", "m")

    def __init__(self, Z: int):
        if Z < 0:
            raise ValueError("order must be nonnegative")
        self.Z = Z
        self.n = 0
        self.m = [1.0] + [0.0] * Z

    def push(self, x: float) -> None:
        self.n += 1
        n = self.n
        m = self.m
        for k in range(min(n, self.Z), 0, -1):
            m[k] = m[k] + k / n * (m[k - 1] * x - m[k])

    def extend(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.push(x)

    @property
    def means(self) -> list[float]:
        """m_0..m_min(n, Z); orders above the sample count are undefined."""
        return self.m[: min(self.n, self.Z) + 1]


def means_incremental(xs: Sequence[float], Z: int | None = None) -> list[float]:
    xs = [float(x) for x in xs]
    Z = _order(len(xs), Z)
    acc = SymmetricMeansAccumulator(Z)
    acc.extend(xs)
    return acc.m
