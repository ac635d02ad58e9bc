# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: real-branch Lambert W and weighted alternating projections."""

from libc.math cimport exp, log, log1p, sqrt, fabs, isnan, isinf, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double E = 2.718281828459045
cdef double BRANCH_POINT = -exp(-1.0)
cdef double SNAP = 1e-12
cdef int MAX_HALLEY = 50


cdef double _seed(double x, int branch) nogil:
    cdef double p, l1, lx
    if x < BRANCH_POINT + 0.25 and x < 0.0:
        p = 2.0 * (E * x + 1.0)
        p = sqrt(p) if p > 0.0 else 0.0
        if branch == -1:
            p = -p
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    if branch == -1:
        l1 = log(-x)
        return l1 - log(-l1)
    if x < 3.0:
        lx = log1p(x)
        return lx * (1.0 - log1p(lx) / (2.0 + lx))
    l1 = log(x)
    return l1 - log(l1)


cdef double _halley(double x, int branch) nogil:
    cdef double w = _seed(x, branch)
    cdef double ew, f, wp1, dw
    cdef int i
    for i in range(MAX_HALLEY):
        ew = exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if fabs(dw) <= 1e-15 * (1.0 + fabs(w)):
            break
    if branch == 0 and w < -1.0:
        w = -1.0
    elif branch == -1 and w > -1.0:
        w = -1.0
    return w


def lambert_w(double x, int branch=0):
    """Real Lambert W on branch 0 (principal) or -1 (lower) by Halley iteration."""
    if branch != 0 and branch != -1:
        raise ValueError(f"branch must be 0 or -1, got {branch}")
    if isnan(x):
        raise ValueError("argument is NaN")
    if fabs(x - BRANCH_POINT) <= SNAP:
        return -1.0
    if x < BRANCH_POINT:
        raise ValueError(f"argument {x!r} is below -1/e")
    if branch == -1 and x >= 0.0:
        raise ValueError(f"lower branch requires -1/e <= x < 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if isinf(x):
        return INFINITY
    return _halley(x, branch)


def demean(double[:, ::1] data, long long[:, ::1] codes, long long[::1] n_groups,
           double[::1] weights, double tol=1e-10, long maxiter=10000):
    """Weighted alternating projections, in place. See ``_fallback.demean``."""
    cdef Py_ssize_t n = data.shape[0], k = data.shape[1], L = codes.shape[0]
    cdef Py_ssize_t i, j, lev, g
    cdef long sweep = 0
    cdef double change = INFINITY, d, v
    if n == 0 or k == 0:
        return 0, 0.0

    cdef Py_ssize_t gmax = 0
    for lev in range(L):
        if n_groups[lev] > gmax:
            gmax = n_groups[lev]
    cdef double[:, ::1] sums = np.zeros((gmax, k))
    cdef double[:, ::1] wsum = np.zeros((L, gmax))
    cdef double[::1] scale = np.ones(k)
    cdef double[:, ::1] before = np.empty((n, k)) if L > 1 else np.empty((0, k))

    with nogil:
        for i in range(n):
            for j in range(k):
                v = fabs(data[i, j])
                if v + 1.0 > scale[j]:
                    scale[j] = v + 1.0
        for lev in range(L):
            for i in range(n):
                wsum[lev, codes[lev, i]] += weights[i]

        while sweep < maxiter:
            sweep += 1
            if L > 1:
                before[:, :] = data
            for lev in range(L):
                for g in range(n_groups[lev]):
                    for j in range(k):
                        sums[g, j] = 0.0
                for i in range(n):
                    g = codes[lev, i]
                    for j in range(k):
                        sums[g, j] += weights[i] * data[i, j]
                for g in range(n_groups[lev]):
                    for j in range(k):
                        sums[g, j] /= wsum[lev, g]
                for i in range(n):
                    g = codes[lev, i]
                    for j in range(k):
                        data[i, j] -= sums[g, j]
            if L == 1:
                change = 0.0
                break
            change = 0.0
            for i in range(n):
                for j in range(k):
                    d = fabs(data[i, j] - before[i, j]) / scale[j]
                    if d > change:
                        change = d
            if change <= tol:
                break
    return sweep, change
