# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial kernels.

Line-for-line transliteration of ``_reference.py`` and the profile
``__call__`` methods.  Keep both sides in the same operation order: the test
suite checks that the two backends agree bit for bit.
"""

from libc.math cimport exp, log1p, sin, floor, pow
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint32_t, int64_t
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

import numpy as np

cdef double GOLDEN = 0.6180339887498949
cdef double INV_2_32 = 1.0 / 4294967296.0

cdef uint32_t H_SEED = 2654435761u   # 0x9E3779B1
cdef uint32_t H_X = 2246822519u      # 0x85EBCA77
cdef uint32_t H_Z = 3266489917u      # 0xC2B2AE3D
cdef uint32_t H_M1 = 739982445u      # 0x2C1B3C6D
cdef uint32_t H_M2 = 695872825u      # 0x297A2D39

# kinds, mirrored from _plan.Kind
cdef enum:
    K_DT = 0
    K_JOHNSON = 1
    K_RT = 2
    K_STP = 3
    K_BK = 4
    K_UBK = 5
    K_URM = 6
    K_BRM = 7
    K_DEPTH = 8

cdef enum:
    P_IID = 0
    P_EQUI = 1
    P_GOLDEN = 2
    P_MIRROR = 3


cdef struct Ctx:
    int fkind
    const double* fp
    Py_ssize_t fn
    Py_ssize_t nwarp
    const double* cdf
    const double* mass
    double a
    double b
    bitgen_t* rng
    int64_t evals
    int kind
    int M
    int pattern
    int epm
    int epm_warped
    int K
    int jn
    int repeats
    double maj
    double ctrl
    double rate
    double c
    double pz
    double sctrl
    int ep_ready
    double g0
    double g1
    double* w
    Py_ssize_t wcap
    double* xs
    Py_ssize_t xcap
    double* m
    Py_ssize_t mcap
    int oom


cdef inline double rnd(Ctx* s) noexcept nogil:
    return s.rng.next_double(s.rng.state)


cdef inline double lattice(int64_t ix, int64_t iz, uint32_t seed) noexcept nogil:
    cdef uint32_t h = seed * H_SEED + (<uint32_t>ix) * H_X + (<uint32_t>iz) * H_Z
    h ^= h >> 15
    h = h * H_M1
    h ^= h >> 12
    h = h * H_M2
    h ^= h >> 15
    return (<double>h) * INV_2_32


cdef inline double value_noise(double px, double pz, uint32_t seed) noexcept nogil:
    cdef double fx0 = floor(px)
    cdef double fz0 = floor(pz)
    cdef double tx = px - fx0
    cdef double tz = pz - fz0
    cdef double sx = tx * tx * (3.0 - 2.0 * tx)
    cdef double sz = tz * tz * (3.0 - 2.0 * tz)
    cdef int64_t ix = <int64_t>fx0
    cdef int64_t iz = <int64_t>fz0
    cdef double c00 = lattice(ix, iz, seed)
    cdef double c10 = lattice(ix + 1, iz, seed)
    cdef double c01 = lattice(ix, iz + 1, seed)
    cdef double c11 = lattice(ix + 1, iz + 1, seed)
    cdef double top = c00 + (c10 - c00) * sx
    cdef double bot = c01 + (c11 - c01) * sx
    return top + (bot - top) * sz


cdef double mu(Ctx* s, double x) noexcept nogil:
    cdef const double* p = s.fp
    cdef double acc, d, fi, amp, freq, total, norm, lo, hi
    cdef Py_ssize_t i, n, o, octaves
    s.evals += 1
    if s.fkind == 0:
        return p[0]
    elif s.fkind == 1:
        lo = p[2]
        hi = p[3]
        if x < lo:
            x = lo
        elif x > hi:
            x = hi
        return p[0] + (p[1] - p[0]) * ((x - lo) / (hi - lo))
    elif s.fkind == 2:
        acc = p[0]
        i = 1
        while i + 2 < s.fn:
            acc += p[i] * sin(p[i + 1] * x + p[i + 2])
            i += 3
        return acc
    elif s.fkind == 3:
        acc = p[0]
        i = 1
        while i + 2 < s.fn:
            d = (x - p[i + 1]) / p[i + 2]
            acc += p[i] * exp(-0.5 * d * d)
            i += 3
        return acc
    elif s.fkind == 4:
        n = s.fn - 2
        fi = floor((x - p[0]) / p[1])
        if fi < 0:
            i = 0
        elif fi >= n:
            i = n - 1
        else:
            i = <Py_ssize_t>fi
        return p[2 + i]
    else:
        octaves = <Py_ssize_t>p[2]
        amp = 1.0
        freq = p[5]
        total = 0.0
        norm = 0.0
        for o in range(octaves):
            total += amp * value_noise(p[1] * freq, x * freq, <uint32_t>(<int64_t>p[6] + o))
            norm += amp
            amp *= p[4]
            freq *= p[3]
        return p[0] * (total / norm)


cdef double g(Ctx* s, double ell, double t) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid, i, n
    cdef double m, cell, x, pdf
    if s.nwarp == 0:
        return mu(s, s.a + t * ell) * ell
    n = s.nwarp
    lo = 0
    hi = n + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if t < s.cdf[mid]:
            hi = mid
        else:
            lo = mid + 1
    i = lo - 1
    if i > n - 1:
        i = n - 1
    elif i < 0:
        i = 0
    while s.mass[i] == 0.0 and i > 0:
        i -= 1
    m = s.mass[i]
    cell = (s.b - s.a) / n
    x = s.a + (<double>i + (t - s.cdf[i]) / m) * cell
    pdf = m / cell
    return mu(s, x) / pdf


cdef void endpoints(Ctx* s, double ell) noexcept nogil:
    if s.ep_ready:
        return
    if s.epm_warped:
        s.g0 = g(s, ell, 0.0)
        s.g1 = g(s, ell, 1.0)
    else:
        s.g0 = mu(s, s.a) * ell
        s.g1 = mu(s, s.a + ell) * ell
    s.ep_ready = 1


cdef double comb_value(Ctx* s, double ell, double u) noexcept nogil:
    cdef int j, h
    cdef int M = s.M
    cdef double mean = 0.0
    cdef double X, t, gv, shift, ga, gb
    if s.pattern == P_EQUI:
        for j in range(M):
            gv = g(s, ell, (u + j) / M)
            mean += (gv - mean) / (j + 1)
        X = -mean
        if s.epm:
            endpoints(s, ell)
            X = X - (0.5 - u) * (s.g1 - s.g0) / M
    elif s.pattern == P_GOLDEN:
        shift = 0.0
        for j in range(M):
            t = u + j * GOLDEN
            t -= floor(t)
            gv = g(s, ell, t)
            mean += (gv - mean) / (j + 1)
            shift += 0.5 - t
        X = -mean
        if s.epm:
            endpoints(s, ell)
            X = X - (s.g1 - s.g0) * (shift / M)
    else:
        h = (M + 1) // 2
        for j in range(h):
            t = (u + j) / h
            ga = g(s, ell, t)
            gb = g(s, ell, 1.0 - t)
            gv = 0.5 * (ga + gb)
            mean += (gv - mean) / (j + 1)
        X = -mean
    return X + s.sctrl * ell


cdef double draw_value(Ctx* s, double ell) noexcept nogil:
    cdef int j
    cdef double mean = 0.0
    cdef double gv
    if s.pattern == P_IID:
        # variates are independent of lookups, so drawing inline keeps the stream order
        for j in range(s.M):
            gv = g(s, ell, rnd(s))
            mean += (gv - mean) / (j + 1)
        return -mean + s.sctrl * ell
    return comb_value(s, ell, rnd(s))


cdef int grow(double** buf, Py_ssize_t* cap, Py_ssize_t need) noexcept nogil:
    cdef Py_ssize_t n
    cdef double* p
    if need <= cap[0]:
        return 0
    n = cap[0] * 2
    if n < need:
        n = need
    p = <double*>realloc(buf[0], n * sizeof(double))
    if p == NULL:
        return 1
    buf[0] = p
    cap[0] = n
    return 0


cdef Py_ssize_t roulette(Ctx* s, double u) noexcept nogil:
    cdef double P = 1.0 - s.pz
    cdef double inv, q
    cdef Py_ssize_t i
    if grow(&s.w, &s.wcap, s.K + 2):
        s.oom = 1
        return 0
    s.w[0] = 1.0
    if P <= u:
        return 0
    inv = 1.0 / P
    for i in range(1, s.K + 1):
        s.w[i] = inv
    i = s.K + 1
    while True:
        q = s.c / i
        if q > 1.0:
            q = 1.0
        P *= q
        if P <= u:
            return i - 1
        if grow(&s.w, &s.wcap, i + 1):
            s.oom = 1
            return 0
        s.w[i] = 1.0 / P
        i += 1


cdef void sym_reset(Ctx* s, Py_ssize_t Z) noexcept nogil:
    cdef Py_ssize_t k
    s.m[0] = 1.0
    for k in range(1, Z + 1):
        s.m[k] = 0.0


cdef inline void sym_push(double* m, Py_ssize_t Z, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t k = n if n < Z else Z
    while k >= 1:
        m[k] = m[k] + (<double>k / <double>n) * (m[k - 1] * x - m[k])
        k -= 1


cdef double series_sum(Ctx* s, Py_ssize_t N) noexcept nogil:
    cdef double acc = 1.0
    cdef double inv = 1.0
    cdef Py_ssize_t k
    for k in range(1, N + 1):
        inv /= k
        acc += s.m[k] * s.w[k] * inv
    return acc


cdef double k_delta(Ctx* s) noexcept nogil:
    cdef double maj = s.maj
    cdef double x, u
    if maj == 0.0:
        return 1.0
    x = s.a
    while True:
        x += -log1p(-rnd(s)) / maj
        if x >= s.b:
            return 1.0
        u = rnd(s)
        if u * maj < mu(s, x):
            return 0.0


cdef double k_johnson(Ctx* s) noexcept nogil:
    cdef double maj = s.maj
    cdef int64_t total = 0
    cdef int r
    cdef double x, u
    if maj > 0.0:
        for r in range(s.jn):
            x = s.a
            while True:
                x += -log1p(-rnd(s)) / maj
                if x >= s.b:
                    break
                u = rnd(s)
                if u * maj < mu(s, x):
                    total += 1
    return pow(1.0 - 1.0 / s.jn, <double>total)


cdef double k_ratio(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    cdef double T = exp(-s.ctrl * ell)
    cdef double mr, x
    if s.rate == 0.0:
        return T
    mr = s.rate / ell
    x = s.a
    while True:
        x += -log1p(-rnd(s)) / mr
        if x >= s.b:
            return T
        T *= 1.0 - (mu(s, x) - s.ctrl) / mr


cdef double k_poisson(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    cdef double lam = s.rate
    cdef double prod = 1.0
    cdef double acc = 0.0
    cdef double y
    while True:
        acc += -log1p(-rnd(s))
        if acc >= lam:
            break
        y = draw_value(s, ell)
        prod *= y / lam
    return exp(lam - s.ctrl * ell) * prod


cdef double k_truncated(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    cdef Py_ssize_t N = roulette(s, rnd(s))
    cdef Py_ssize_t k
    cdef double acc = 1.0
    cdef double prod = 1.0
    cdef double y
    for k in range(1, N + 1):
        y = draw_value(s, ell)
        prod *= y / k
        acc += prod * s.w[k]
    return exp(-s.ctrl * ell) * acc


cdef double k_ubk(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    cdef Py_ssize_t N = roulette(s, rnd(s))
    cdef Py_ssize_t i
    if s.oom or grow(&s.m, &s.mcap, N + 1):
        s.oom = 1
        return 0.0
    sym_reset(s, N)
    for i in range(1, N + 1):
        sym_push(s.m, N, i, draw_value(s, ell))
    return exp(-s.ctrl * ell) * series_sum(s, N)


cdef double k_unbiased(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    cdef Py_ssize_t N = roulette(s, rnd(s))
    cdef Py_ssize_t i, j, n
    cdef double T = 0.0
    cdef double xj, v
    if s.oom or grow(&s.m, &s.mcap, N + 1) or grow(&s.xs, &s.xcap, N + 1):
        s.oom = 1
        return 0.0
    for i in range(N + 1):
        s.xs[i] = comb_value(s, ell, rnd(s))
    for j in range(N + 1):
        xj = s.xs[j]
        sym_reset(s, N)
        n = 0
        for i in range(N + 1):
            if i != j:
                n += 1
                sym_push(s.m, N, n, s.xs[i] - xj)
        v = exp(xj) * series_sum(s, N)
        T += (v - T) / (j + 1)
    return T


cdef double k_biased(Ctx* s) noexcept nogil:
    cdef double ell = s.b - s.a
    return exp(comb_value(s, ell, rnd(s)))


cdef double k_depth(Ctx* s) noexcept nogil:
    return draw_value(s, s.b - s.a)


cdef double one(Ctx* s) noexcept nogil:
    s.ep_ready = 0
    if s.kind == K_DT:
        return k_delta(s)
    elif s.kind == K_JOHNSON:
        return k_johnson(s)
    elif s.kind == K_RT:
        return k_ratio(s)
    elif s.kind == K_STP:
        return k_poisson(s)
    elif s.kind == K_BK:
        return k_truncated(s)
    elif s.kind == K_UBK:
        return k_ubk(s)
    elif s.kind == K_URM:
        return k_unbiased(s)
    elif s.kind == K_BRM:
        return k_biased(s)
    return k_depth(s)


cdef double trial(Ctx* s) noexcept nogil:
    cdef int r
    cdef double mean
    if s.repeats == 1:
        return one(s)
    mean = 0.0
    for r in range(s.repeats):
        mean += (one(s) - mean) / (r + 1)
    return mean


def run_block(const int64_t[::1] ints, const double[::1] floats, int fkind,
              const double[::1] fparams, const double[::1] cdf, const double[::1] mass,
              Py_ssize_t n, object rng):
    """Run ``n`` trials of a packed plan; returns ``(values, evals)``."""
    cdef Ctx s
    cdef Py_ssize_t t
    cdef int64_t before
    values = np.empty(n, dtype=np.float64)
    evals = np.empty(n, dtype=np.int64)
    cdef double[::1] vv = values
    cdef int64_t[::1] ev = evals
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule

    s.rng = <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")
    s.fkind = fkind
    s.fp = &fparams[0]
    s.fn = fparams.shape[0]
    s.nwarp = ints[8]
    s.cdf = &cdf[0]
    s.mass = &mass[0]
    s.kind = <int>ints[0]
    s.M = <int>ints[1]
    s.pattern = <int>ints[2]
    s.epm = <int>ints[3]
    s.epm_warped = <int>ints[4]
    s.K = <int>ints[5]
    s.jn = <int>ints[6]
    s.repeats = <int>ints[7]
    s.a = floats[0]
    s.b = floats[1]
    s.maj = floats[2]
    s.ctrl = floats[3]
    s.rate = floats[4]
    s.c = floats[5]
    s.pz = floats[6]
    s.sctrl = floats[7]
    s.evals = 0
    s.ep_ready = 0
    s.oom = 0
    s.wcap = 16
    s.xcap = 16
    s.mcap = 16
    s.w = <double*>malloc(16 * sizeof(double))
    s.xs = <double*>malloc(16 * sizeof(double))
    s.m = <double*>malloc(16 * sizeof(double))
    try:
        if s.w == NULL or s.xs == NULL or s.m == NULL:
            raise MemoryError()
        with bit_generator.lock:
            with nogil:
                for t in range(n):
                    before = s.evals
                    vv[t] = trial(&s)
                    ev[t] = s.evals - before
                    if s.oom:
                        break
        if s.oom:
            raise MemoryError("trial work buffers could not grow")
    finally:
        free(s.w)
        free(s.xs)
        free(s.m)
    return values, evals
