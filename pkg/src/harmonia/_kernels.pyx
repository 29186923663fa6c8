# cython: language_level=3
"""Compiled inner loops.

Every function here has a line-for-line twin in :mod:`harmonia._purekernels`
that consumes the same random numbers in the same order, so both backends
return identical arrays for identical arguments.  Replicate ``r`` always draws
from ``PCG64(SeedSequence(seed, spawn_key=(r,)))``.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p, INFINITY
from libc.stdint cimport int64_t, uint8_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    binomial_t,
    random_standard_exponential,
    random_multinomial,
)

cnp.import_array()

BACKEND = "compiled"

cdef const char *_CAPSULE_NAME = "BitGenerator"


cdef object _stream(object seed, Py_ssize_t r):
    return np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,)))


cdef inline bitgen_t *_bitgen(object bg) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bg.capsule, _CAPSULE_NAME)


cdef inline Py_ssize_t _search(const double *cdf, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    while j < n - 1 and not (u < cdf[j]):
        j += 1
    return j


def ct_populations(object seed, Py_ssize_t rep_start, Py_ssize_t rep_stop, int64_t k0,
                   const double[::1] seg_ends, const double[:, ::1] seg_cdf,
                   const int64_t[:, ::1] seg_values,
                   const int64_t[::1] seg_natoms, const double[::1] t_grid, int64_t cap):
    """Populations of a unit-rate, zero-free continuous-time process at ``t_grid``.

    Returns ``(pops[R, G], censored[R])``.
    """
    cdef Py_ssize_t R = rep_stop - rep_start
    cdef Py_ssize_t G = t_grid.shape[0]
    out_np = np.zeros((R, G), dtype=np.int64)
    cens_np = np.zeros(R, dtype=np.uint8)
    cdef int64_t[:, ::1] out = out_np
    cdef uint8_t[::1] cens = cens_np
    cdef Py_ssize_t i, g, seg, j
    cdef int64_t z, inc
    cdef double t, tn, u
    cdef bitgen_t *rng
    for i in range(R):
        bg = _stream(seed, rep_start + i)
        rng = _bitgen(bg)
        with nogil:
            z = k0
            t = 0.0
            seg = 0
            g = 0
            while g < G:
                tn = t + random_standard_exponential(rng) / <double> z
                if tn >= seg_ends[seg]:
                    while g < G and t_grid[g] < seg_ends[seg]:
                        out[i, g] = z
                        g += 1
                    t = seg_ends[seg]
                    seg += 1
                    continue
                while g < G and t_grid[g] < tn:
                    out[i, g] = z
                    g += 1
                if g == G:
                    break
                u = rng.next_double(rng.state)
                j = _search(&seg_cdf[seg, 0], seg_natoms[seg], u)
                inc = seg_values[seg, j]
                if z > cap - inc:
                    cens[i] = 1
                    while g < G:
                        out[i, g] = z
                        g += 1
                    break
                z += inc
                t = tn
    return out_np, cens_np


def dt_populations(object seed, Py_ssize_t rep_start, Py_ssize_t rep_stop, int64_t k0,
                   const int64_t[::1] n_grid, const int64_t[::1] values, const double[::1] cdf,
                   const double[::1] probs, int64_t switch, int64_t cap):
    """Galton-Watson populations (each individual becomes ``1 + L``) at generations ``n_grid``.

    Populations up to ``switch`` draw individual by individual; larger ones
    draw all atom counts at once from a multinomial.  Returns
    ``(pops[R, G], overflow[R])``.
    """
    cdef Py_ssize_t R = rep_stop - rep_start
    cdef Py_ssize_t G = n_grid.shape[0]
    cdef Py_ssize_t A = values.shape[0]
    out_np = np.zeros((R, G), dtype=np.int64)
    ovf_np = np.zeros(R, dtype=np.uint8)
    counts_np = np.zeros(A, dtype=np.int64)
    cdef int64_t[:, ::1] out = out_np
    cdef uint8_t[::1] ovf = ovf_np
    cdef int64_t[::1] counts = counts_np
    cdef Py_ssize_t i, g, a
    cdef int64_t Z, n, inc, q, room
    cdef bint bad
    cdef binomial_t binom
    cdef bitgen_t *rng
    for i in range(R):
        bg = _stream(seed, rep_start + i)
        rng = _bitgen(bg)
        binom.has_binomial = 0
        with nogil:
            Z = k0
            n = 0
            g = 0
            while g < G and n_grid[g] == 0:
                out[i, g] = Z
                g += 1
            while g < G:
                inc = 0
                bad = False
                room = cap - Z
                if Z <= switch:
                    for q in range(Z):
                        inc += values[_search(&cdf[0], A, rng.next_double(rng.state))]
                    if inc > room:
                        bad = True
                else:
                    # random_multinomial leaves trailing counts untouched once the total is used up
                    for a in range(A):
                        counts[a] = 0
                    random_multinomial(rng, Z, &counts[0], <double *>&probs[0], A, &binom)
                    for a in range(A):
                        if values[a] == 0 or counts[a] == 0:
                            continue
                        if counts[a] > (room - inc) // values[a]:
                            bad = True
                            break
                        inc += counts[a] * values[a]
                if bad:
                    ovf[i] = 1
                    while g < G:
                        out[i, g] = Z
                        g += 1
                    break
                Z += inc
                n += 1
                while g < G and n_grid[g] == n:
                    out[i, g] = Z
                    g += 1
    return out_np, ovf_np


def log_products(object seed, Py_ssize_t rep_start, Py_ssize_t rep_stop, double x, double mean,
                 const int64_t[::1] values, const double[::1] cdf, const int64_t[::1] marks):
    """``log R_n = sum_{i=0}^{n} log(1 + mean/(x + S_i))`` at each ``n`` in ``marks``."""
    cdef Py_ssize_t R = rep_stop - rep_start
    cdef Py_ssize_t G = marks.shape[0]
    cdef Py_ssize_t A = values.shape[0]
    out_np = np.zeros((R, G), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t i, g
    cdef int64_t n, S
    cdef double acc
    cdef bitgen_t *rng
    for i in range(R):
        bg = _stream(seed, rep_start + i)
        rng = _bitgen(bg)
        with nogil:
            S = 0
            acc = log1p(mean / x)
            n = 0
            g = 0
            while g < G and marks[g] == 0:
                out[i, g] = acc
                g += 1
            while g < G:
                S += values[_search(&cdf[0], A, rng.next_double(rng.state))]
                n += 1
                acc += log1p(mean / (x + <double> S))
                while g < G and marks[g] == n:
                    out[i, g] = acc
                    g += 1
    return out_np


def downward(double[::1] lo, double[::1] hi, Py_ssize_t k_stop, Py_ssize_t k_start,
             const int64_t[::1] steps, const double[::1] weights, double p0, double mean,
             double m1, double m2):
    """Apply ``h(k) = k sum_j w_j h(k + j) / (k - mean - k p0)`` for ``k = k_start-1 .. k_stop``.

    ``lo`` and ``hi`` are indexed by ``k`` and updated in place.  Both rows are
    clamped into ``[max(1/(k - m1), 1/k), 1/(k - m2)]`` (upper end only when
    ``k > m2``), and ``hi`` is kept at or above ``lo`` so rounding cannot
    invert a bracket.
    """
    cdef Py_ssize_t k, a
    cdef Py_ssize_t A = steps.shape[0]
    cdef double sl, sh, den, kk, floor_, ceil_
    with nogil:
        k = k_start - 1
        while k >= k_stop:
            kk = <double> k
            sl = 0.0
            sh = 0.0
            for a in range(A):
                sl += weights[a] * lo[k + steps[a]]
                sh += weights[a] * hi[k + steps[a]]
            den = kk - mean - kk * p0
            sl = kk * sl / den
            sh = kk * sh / den
            floor_ = 1.0 / (kk - m1)
            if floor_ < 1.0 / kk:
                floor_ = 1.0 / kk
            if sl < floor_:
                sl = floor_
            if sh < floor_:
                sh = floor_
            if kk > m2:
                ceil_ = 1.0 / (kk - m2)
                if sh > ceil_:
                    sh = ceil_
                if sl > ceil_:
                    sl = ceil_
            if sh < sl:
                sh = sl
            lo[k] = sl
            hi[k] = sh
            k -= 1
