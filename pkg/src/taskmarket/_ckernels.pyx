# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; mirrors taskmarket._pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs, INFINITY

cnp.import_array()


cdef inline double _gap(double z, double lm, double lr, double la, double wage,
                        bint normalized, double kbar, double theta, double gamma,
                        double rental) nogil:
    cdef double m = 1.0 - z
    cdef double r = 4.0 * z * (1.0 - z)
    cdef double lam = lm * m + lr * r + la * z
    cdef double labor
    if normalized:
        lam /= m + r + z
    if lam > 0.0:
        labor = wage / lam
    else:
        labor = INFINITY
    return labor - rental / (kbar + theta * pow(z, gamma))


def cost_gap(double z, double lm, double lr, double la, double wage, bint normalized,
             double kbar, double theta, double gamma, double rental):
    return _gap(z, lm, lr, la, wage, normalized, kbar, theta, gamma, rental)


def bisect_cost_gap(double lo, double hi, double lm, double lr, double la, double wage,
                    bint normalized, double kbar, double theta, double gamma,
                    double rental, double xtol, int maxiter):
    cdef double g_lo = _gap(lo, lm, lr, la, wage, normalized, kbar, theta, gamma, rental)
    cdef double g_hi = _gap(hi, lm, lr, la, wage, normalized, kbar, theta, gamma, rental)
    cdef double mid = lo, g_mid = 1.0
    cdef bint neg_lo
    cdef int it = 0
    if g_lo == 0.0:
        return lo, 0, True
    if g_hi == 0.0:
        return hi, 0, True
    neg_lo = g_lo < 0.0
    with nogil:
        while hi - lo > xtol and it < maxiter:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            it += 1
            g_mid = _gap(mid, lm, lr, la, wage, normalized, kbar, theta, gamma, rental)
            if g_mid == 0.0:
                break
            if (g_mid < 0.0) == neg_lo:
                lo = mid
                g_lo = g_mid
            else:
                hi = mid
                g_hi = g_mid
    if it > 0 and g_mid == 0.0:
        return mid, it, True
    root = lo if fabs(g_lo) <= fabs(g_hi) else hi
    return root, it, hi - lo <= xtol or it < maxiter


def demean_alternating(double[:, ::1] X, const cnp.int64_t[:, ::1] codes,
                       const cnp.int64_t[::1] n_levels, double tol, int maxiter):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t k = X.shape[1]
    cdef Py_ssize_t n_factors = codes.shape[1]
    cdef Py_ssize_t i, j, f, g, max_levels = 1
    cdef int sweep, done = 0
    cdef double biggest, v
    for f in range(n_factors):
        if n_levels[f] > max_levels:
            max_levels = n_levels[f]
    cdef double[::1] sums = np.zeros(max_levels)
    cdef double[:, ::1] counts = np.zeros((max(n_factors, 1), max_levels))
    for f in range(n_factors):
        for i in range(n):
            counts[f, codes[i, f]] += 1.0

    with nogil:
        for sweep in range(1, maxiter + 1):
            biggest = 0.0
            for f in range(n_factors):
                for j in range(k):
                    for g in range(n_levels[f]):
                        sums[g] = 0.0
                    for i in range(n):
                        sums[codes[i, f]] += X[i, j]
                    for g in range(n_levels[f]):
                        if counts[f, g] > 0.0:
                            sums[g] /= counts[f, g]
                            v = fabs(sums[g])
                            if v > biggest:
                                biggest = v
                    for i in range(n):
                        X[i, j] -= sums[codes[i, f]]
            if n_factors <= 1 or biggest <= tol:
                done = 1
                break
    if done:
        return sweep, True
    return maxiter, False
