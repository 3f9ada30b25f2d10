"""Analytic 1-D extinction profiles along a ray.

Every profile is an immutable, deterministic function ``mu(x) >= 0`` with
reference quantities (optical depth, bounds) that the estimators are checked
against.  Profiles also know how to pack themselves into a flat float array
for the compiled kernels; the scalar ``__call__`` of each profile performs the
exact same floating-point operations as the kernel so both backends agree
bit for bit.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "Interval",
    "FieldStats",
    "EvalCounter",
    "Constant",
    "LinearRamp",
    "SineSum",
    "GaussianMix",
    "PiecewiseConstantGrid",
    "Fractal2DSlice",
    "WarpMap",
    "evaluate",
    "exact_optical_depth",
    "is_closed_form",
    "field_stats",
    "cell_means",
    "piecewise_pdf_warp",
    "quadrature_optical_depth",
]

# kind codes shared with _kernels.pyx
KIND_CONSTANT = 0
KIND_RAMP = 1
KIND_SINES = 2
KIND_GAUSS = 3
KIND_GRID = 4
KIND_FRACTAL = 5

_QUAD_ABS_TOL = 1e-12
_QUAD_MAX_EVALS = 2**20


@dataclass(frozen=True)
class Interval:
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("interval endpoints must be finite")
        if not self.b > self.a:
            raise ValueError(f"interval needs b > a, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class FieldStats:
    """Bounds and mean of a profile over an interval.

    ``exact_tau`` is ``None`` when the optical depth had to come from
    numerical quadrature.
    """

    majorant: float
    minorant: float
    mean: float
    exact_tau: float | None = None


class EvalCounter:
    """Counts density lookups within one trial."""

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = count

    def __repr__(self):
        return f"EvalCounter({self.count})"


class _Profile:
    """Shared plumbing for the concrete profiles below."""

    kind: int

    def __call__(self, x: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def integral(self, a: float, b: float) -> float | None:
        """Closed-form integral over [a, b], or None."""
        return None

    def bounds(self, a: float, b: float) -> tuple[float, float]:
        raise NotImplementedError

    def scaled(self, k: float):
        raise NotImplementedError

    def _params(self) -> list[float]:
        raise NotImplementedError

    @cached_property
    def packed(self) -> tuple[int, np.ndarray]:
        return self.kind, np.ascontiguousarray(self._params(), dtype=np.float64)

    def values(self, xs) -> np.ndarray:
        """Vectorized evaluation (analysis only, not bit-matched to the kernel)."""
        return np.array([self(float(x)) for x in np.asarray(xs, dtype=float)])


@dataclass(frozen=True)
class Constant(_Profile):
    level: float
    kind = KIND_CONSTANT

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError("extinction must be nonnegative")

    def __call__(self, x):
        return self.level

    def integral(self, a, b):
        return self.level * (b - a)

    def bounds(self, a, b):
        return self.level, self.level

    def scaled(self, k):
        return Constant(self.level * k)

    def _params(self):
        return [self.level]

    def values(self, xs):
        return np.full(np.shape(xs), self.level, dtype=float)


@dataclass(frozen=True)
class LinearRamp(_Profile):
    """Linear ramp from ``v0`` at ``start`` to ``v1`` at ``end``, clamped outside."""

    v0: float
    v1: float
    start: float = 0.0
    end: float = 1.0
    kind = KIND_RAMP

    def __post_init__(self):
        if self.v0 < 0 or self.v1 < 0:
            raise ValueError("ramp values must be nonnegative")
        if not self.end > self.start:
            raise ValueError("ramp needs end > start")

    def __call__(self, x):
        if x < self.start:
            x = self.start
        elif x > self.end:
            x = self.end
        return self.v0 + (self.v1 - self.v0) * ((x - self.start) / (self.end - self.start))

    def _antideriv(self, x):
        # integral from start to x of the clamped ramp
        if x <= self.start:
            return self.v0 * (x - self.start)
        span = self.end - self.start
        if x >= self.end:
            return 0.5 * (self.v0 + self.v1) * span + self.v1 * (x - self.end)
        s = x - self.start
        return self.v0 * s + 0.5 * (self.v1 - self.v0) * s * s / span

    def integral(self, a, b):
        return self._antideriv(b) - self._antideriv(a)

    def bounds(self, a, b):
        lo, hi = sorted((self(a), self(b)))
        return lo, hi

    def scaled(self, k):
        return LinearRamp(self.v0 * k, self.v1 * k, self.start, self.end)

    def _params(self):
        return [self.v0, self.v1, self.start, self.end]

    def values(self, xs):
        t = (np.clip(xs, self.start, self.end) - self.start) / (self.end - self.start)
        return self.v0 + (self.v1 - self.v0) * t


@dataclass(frozen=True)
class SineSum(_Profile):
    """``offset + sum(a * sin(f * x + phase))`` with angular frequencies ``f``."""

    terms: tuple[tuple[float, float, float], ...]
    offset: float
    kind = KIND_SINES

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(map(float, t)) for t in self.terms))
        if self.offset < sum(abs(a) for a, _, _ in self.terms):
            raise ValueError("SineSum offset must dominate the amplitude sum")

    def __call__(self, x):
        acc = self.offset
        for a, f, p in self.terms:
            acc += a * math.sin(f * x + p)
        return acc

    def integral(self, a, b):
        total = self.offset * (b - a)
        for amp, f, p in self.terms:
            if f == 0.0:
                total += amp * math.sin(p) * (b - a)
            else:
                total += amp * (math.cos(f * a + p) - math.cos(f * b + p)) / f
        return total

    def bounds(self, a, b):
        swing = sum(abs(amp) for amp, _, _ in self.terms)
        return self.offset - swing, self.offset + swing

    def scaled(self, k):
        return SineSum(tuple((a * k, f, p) for a, f, p in self.terms), self.offset * k)

    def with_amplitude_scale(self, k):
        return SineSum(tuple((a * k, f, p) for a, f, p in self.terms), self.offset)

    def _params(self):
        out = [self.offset]
        for t in self.terms:
            out.extend(t)
        return out

    def values(self, xs):
        xs = np.asarray(xs, dtype=float)
        acc = np.full(xs.shape, self.offset)
        for a, f, p in self.terms:
            acc = acc + a * np.sin(f * xs + p)
        return acc


@dataclass(frozen=True)
class GaussianMix(_Profile):
    """``offset + sum(w * exp(-((x - c) / s)**2 / 2))`` with nonnegative weights."""

    bumps: tuple[tuple[float, float, float], ...]
    offset: float = 0.0
    kind = KIND_GAUSS

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(tuple(map(float, t)) for t in self.bumps))
        if self.offset < 0 or any(w < 0 or s <= 0 for w, _, s in self.bumps):
            raise ValueError("GaussianMix needs offset >= 0, weights >= 0 and widths > 0")

    def __call__(self, x):
        acc = self.offset
        for w, c, s in self.bumps:
            d = (x - c) / s
            acc += w * math.exp(-0.5 * d * d)
        return acc

    def integral(self, a, b):
        total = self.offset * (b - a)
        root2 = math.sqrt(2.0)
        for w, c, s in self.bumps:
            total += w * s * math.sqrt(math.pi / 2.0) * (
                math.erf((b - c) / (s * root2)) - math.erf((a - c) / (s * root2))
            )
        return total

    def bounds(self, a, b):
        return self.offset, self.offset + sum(w for w, _, _ in self.bumps)

    def scaled(self, k):
        return GaussianMix(tuple((w * k, c, s) for w, c, s in self.bumps), self.offset * k)

    def _params(self):
        out = [self.offset]
        for t in self.bumps:
            out.extend(t)
        return out

    def values(self, xs):
        xs = np.asarray(xs, dtype=float)
        acc = np.full(xs.shape, self.offset)
        for w, c, s in self.bumps:
            d = (xs - c) / s
            acc = acc + w * np.exp(-0.5 * d * d)
        return acc


@dataclass(frozen=True)
class PiecewiseConstantGrid(_Profile):
    """Nearest-cell grid: cell ``i`` covers ``[origin + i*w, origin + (i+1)*w)``.

    Positions outside the grid clamp to the edge cells.
    """

    cells: tuple[float, ...]
    cell_width: float
    origin: float = 0.0
    kind = KIND_GRID

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(float(v) for v in self.cells))
        if not self.cells:
            raise ValueError("grid needs at least one cell")
        if min(self.cells) < 0:
            raise ValueError("grid values must be nonnegative")
        if not self.cell_width > 0:
            raise ValueError("cell width must be positive")

    def _index(self, x):
        i = math.floor((x - self.origin) / self.cell_width)
        n = len(self.cells)
        return 0 if i < 0 else (n - 1 if i >= n else i)

    def __call__(self, x):
        return self.cells[self._index(x)]

    def integral(self, a, b):
        n = len(self.cells)
        w = self.cell_width
        total = 0.0
        # left/right clamp regions extend the edge cells
        lo_edge, hi_edge = self.origin, self.origin + n * w
        if a < lo_edge:
            total += self.cells[0] * (min(b, lo_edge) - a)
        if b > hi_edge:
            total += self.cells[-1] * (b - max(a, hi_edge))
        i0, i1 = self._index(max(a, lo_edge)), self._index(min(b, hi_edge))
        for i in range(i0, i1 + 1):
            c0 = max(a, self.origin + i * w)
            c1 = min(b, self.origin + (i + 1) * w)
            if c1 > c0:
                total += self.cells[i] * (c1 - c0)
        return total

    def bounds(self, a, b):
        i0, i1 = self._index(a), self._index(b)
        vals = self.cells[i0 : i1 + 1]
        return min(vals), max(vals)

    def scaled(self, k):
        return PiecewiseConstantGrid(tuple(v * k for v in self.cells), self.cell_width, self.origin)

    def _params(self):
        return [self.origin, self.cell_width, *self.cells]


_M32 = 0xFFFFFFFF


def _lattice(ix: int, iz: int, seed: int) -> float:
    h = (seed * 0x9E3779B1 + ix * 0x85EBCA77 + iz * 0xC2B2AE3D) & _M32
    h ^= h >> 15
    h = (h * 0x2C1B3C6D) & _M32
    h ^= h >> 12
    h = (h * 0x297A2D39) & _M32
    h ^= h >> 15
    return h * (1.0 / 4294967296.0)


def _value_noise(px: float, pz: float, seed: int) -> float:
    fx0 = math.floor(px)
    fz0 = math.floor(pz)
    tx = px - fx0
    tz = pz - fz0
    sx = tx * tx * (3.0 - 2.0 * tx)
    sz = tz * tz * (3.0 - 2.0 * tz)
    c00 = _lattice(fx0, fz0, seed)
    c10 = _lattice(fx0 + 1, fz0, seed)
    c01 = _lattice(fx0, fz0 + 1, seed)
    c11 = _lattice(fx0 + 1, fz0 + 1, seed)
    top = c00 + (c10 - c00) * sx
    bot = c01 + (c11 - c01) * sx
    return top + (bot - top) * sz


@dataclass(frozen=True)
class Fractal2DSlice(_Profile):
    """One ray (along z) through a seeded 2-D value-noise fBm density.

    ``column`` is the fixed x coordinate of the ray, ``scale`` the density
    modulation (e.g. the slab's height profile).  fBm values lie in [0, 1],
    so ``mu`` lies in ``[0, scale]``.  Along z every octave is a piecewise
    cubic, which makes piecewise Gauss-Legendre integration exact.
    """

    octaves: int = 6
    lacunarity: float = 2.0
    gain: float = 0.5
    seed: int = 0
    scale: float = 1.0
    column: float = 0.5
    base_frequency: float = 4.0
    kind = KIND_FRACTAL

    def __post_init__(self):
        if self.octaves < 1 or self.lacunarity <= 0 or self.gain <= 0 or self.base_frequency <= 0:
            raise ValueError("bad fractal parameters")
        if self.scale < 0:
            raise ValueError("fractal scale must be nonnegative")
        if not 0 <= self.seed < 2**32:
            raise ValueError("fractal seed must fit in 32 bits")

    def _octaves(self):
        amp, freq = 1.0, self.base_frequency
        for o in range(self.octaves):
            yield o, amp, freq
            amp *= self.gain
            freq *= self.lacunarity

    def __call__(self, x):
        total = 0.0
        norm = 0.0
        for o, amp, freq in self._octaves():
            total += amp * _value_noise(self.column * freq, x * freq, self.seed + o)
            norm += amp
        return self.scale * (total / norm)

    def values(self, xs):
        zs = np.asarray(xs, dtype=float)
        total = np.zeros(zs.shape)
        norm = 0.0
        for o, amp, freq in self._octaves():
            total += amp * _value_noise_vec(self.column * freq, zs * freq, self.seed + o)
            norm += amp
        return self.scale * (total / norm)

    def breakpoints(self, a, b):
        pts = {a, b}
        for _, _, freq in self._octaves():
            k0, k1 = math.floor(a * freq) + 1, math.ceil(b * freq)
            pts.update(k / freq for k in range(k0, k1))
        return sorted(p for p in pts if a <= p <= b)

    def integral(self, a, b):
        # exact for piecewise cubics: 3-point Gauss-Legendre per smooth piece
        pts = np.asarray(self.breakpoints(a, b))
        nodes, weights = np.polynomial.legendre.leggauss(3)
        lo, hi = pts[:-1], pts[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        zs = mid[:, None] + half[:, None] * nodes[None, :]
        return float(np.sum(half * (self.values(zs) @ weights)))

    def bounds(self, a, b):
        lo = hi = 0.0
        norm = 0.0
        for o, amp, freq in self._octaves():
            ix = math.floor(self.column * freq)
            iz0, iz1 = math.floor(a * freq), math.floor(b * freq) + 1
            vals = [
                _lattice(i, k, self.seed + o)
                for i in (ix, ix + 1)
                for k in range(iz0, iz1 + 1)
            ]
            lo += amp * min(vals)
            hi += amp * max(vals)
            norm += amp
        return self.scale * (lo / norm), self.scale * (hi / norm)

    def scaled(self, k):
        return Fractal2DSlice(
            self.octaves, self.lacunarity, self.gain, self.seed, self.scale * k,
            self.column, self.base_frequency,
        )

    def _params(self):
        return [
            self.scale, self.column, float(self.octaves), self.lacunarity,
            self.gain, self.base_frequency, float(self.seed),
        ]


def _lattice_vec(ix, iz, seed):
    ix = np.asarray(ix, dtype=np.int64).astype(np.uint64)
    iz = np.asarray(iz, dtype=np.int64).astype(np.uint64)
    m = np.uint64(_M32)
    h = (np.uint64(seed * 0x9E3779B1 & _M32) + ix * np.uint64(0x85EBCA77)
         + iz * np.uint64(0xC2B2AE3D)) & m
    h ^= h >> np.uint64(15)
    h = (h * np.uint64(0x2C1B3C6D)) & m
    h ^= h >> np.uint64(12)
    h = (h * np.uint64(0x297A2D39)) & m
    h ^= h >> np.uint64(15)
    return h.astype(np.float64) * (1.0 / 4294967296.0)


def _value_noise_vec(px, pz, seed):
    fx0 = math.floor(px)
    fz0 = np.floor(pz)
    tx = px - fx0
    tz = pz - fz0
    sx = tx * tx * (3.0 - 2.0 * tx)
    sz = tz * tz * (3.0 - 2.0 * tz)
    iz = fz0.astype(np.int64)
    c00 = _lattice_vec(fx0, iz, seed)
    c10 = _lattice_vec(fx0 + 1, iz, seed)
    c01 = _lattice_vec(fx0, iz + 1, seed)
    c11 = _lattice_vec(fx0 + 1, iz + 1, seed)
    top = c00 + (c10 - c00) * sx
    bot = c01 + (c11 - c01) * sx
    return top + (bot - top) * sz


def evaluate(field: _Profile, x: float, counter: EvalCounter | None = None) -> float:
    """Point lookup of the extinction coefficient, charged to ``counter``."""
    if counter is not None:
        counter.count += 1
    return field(x)


def quadrature_optical_depth(field: _Profile, interval: Interval) -> float:
    """Adaptive Gauss-Kronrod integral of the profile (QUADPACK)."""
    pts = None
    if hasattr(field, "breakpoints"):
        pts = field.breakpoints(interval.a, interval.b)[1:-1] or None
    limit = _QUAD_MAX_EVALS // 21
    value, _ = integrate.quad(
        field, interval.a, interval.b, epsabs=_QUAD_ABS_TOL, epsrel=0.0,
        limit=limit, points=pts,
    )
    return float(value)


def is_closed_form(field: _Profile) -> bool:
    return not isinstance(field, Fractal2DSlice) and type(field).integral is not _Profile.integral


def exact_optical_depth(field: _Profile, interval: Interval) -> float:
    """tau = integral of mu over the interval.

    Closed form where the profile has one; the fractal profile uses exact
    piecewise Gauss-Legendre; anything else falls back to adaptive quadrature.
    """
    value = field.integral(interval.a, interval.b)
    if value is None:
        value = quadrature_optical_depth(field, interval)
    return value


def field_stats(field: _Profile, interval: Interval) -> FieldStats:
    lo, hi = field.bounds(interval.a, interval.b)
    tau = exact_optical_depth(field, interval)
    mean = tau / interval.length
    # quadrature rounding must not push the mean outside its own bounds
    mean = min(max(mean, lo), hi)
    return FieldStats(hi, lo, mean, tau if is_closed_form(field) else None)


def cell_means(field: _Profile, interval: Interval, n: int) -> list[float]:
    """Mean extinction over ``n`` equal cells of the interval."""
    w = interval.length / n
    return [
        exact_optical_depth(field, Interval(interval.a + i * w, interval.a + (i + 1) * w)) / w
        for i in range(n)
    ]


@dataclass(frozen=True)
class WarpMap:
    """Inverse-CDF map of a piecewise-constant PDF over equal cells of an interval."""

    a: float
    b: float
    masses: tuple[float, ...]
    cdf: tuple[float, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.masses)

    @property
    def cell(self) -> float:
        return (self.b - self.a) / len(self.masses)

    def _cell_of(self, t: float) -> int:
        i = bisect.bisect_right(self.cdf, t) - 1
        n = len(self.masses)
        if i > n - 1:
            i = n - 1
        elif i < 0:
            i = 0
        while self.masses[i] == 0.0 and i > 0:
            i -= 1
        return i

    def sample(self, t: float) -> tuple[float, float]:
        """Map primary ``t`` in [0, 1] to ``(x, pdf(x))``."""
        i = self._cell_of(t)
        m = self.masses[i]
        cell = (self.b - self.a) / len(self.masses)
        x = self.a + (i + (t - self.cdf[i]) / m) * cell
        return x, m / cell

    def __call__(self, t: float) -> float:
        return self.sample(t)[0]

    def pdf(self, x: float) -> float:
        n = len(self.masses)
        i = min(max(math.floor((x - self.a) / self.cell), 0), n - 1)
        return self.masses[i] / self.cell

    def inverse(self, x: float) -> float:
        n = len(self.masses)
        i = min(max(math.floor((x - self.a) / self.cell), 0), n - 1)
        return self.cdf[i] + (x - self.a - i * self.cell) / self.cell * self.masses[i]

    @property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.cdf, dtype=np.float64), np.asarray(self.masses, dtype=np.float64)


def piecewise_pdf_warp(means: Sequence[float], interval: Interval = Interval(0.0, 1.0)) -> WarpMap:
    """Warp distributing points proportionally to per-cell mean densities.

    All-zero means give the identity (uniform) warp.
    """
    means = [float(m) for m in means]
    if not means or min(means) < 0:
        raise ValueError("cell means must be a nonempty list of nonnegative values")
    total = math.fsum(means)
    if total <= 0:
        means = [1.0] * len(means)
        total = float(len(means))
    masses = tuple(m / total for m in means)
    cdf = [0.0]
    for m in masses:
        cdf.append(cdf[-1] + m)
    cdf[-1] = 1.0
    return WarpMap(interval.a, interval.b, masses, tuple(cdf))
