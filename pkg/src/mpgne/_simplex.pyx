# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense two-phase simplex.  Mirrors ``_simplex_py.simplex_std``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef enum:
    OPTIMAL = 0
    INFEASIBLE = 1
    UNBOUNDED = 2
    ITERATION_LIMIT = 3


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t e) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = T.shape[0]
    cdef Py_ssize_t nc = T.shape[1]
    cdef double piv = T[r, e]
    cdef double f
    for j in range(nc):
        T[r, j] = T[r, j] / piv
    for i in range(nr):
        if i == r:
            continue
        f = T[i, e]
        if f == 0.0:
            continue
        for j in range(nc):
            T[i, j] = T[i, j] - f * T[r, j]


cdef int _run(double[:, ::1] T, long long[::1] basis, Py_ssize_t k,
              Py_ssize_t ncols, double tol, int max_iter, int bland_after,
              int* it, double target) noexcept nogil:
    cdef int stalled = 0
    cdef bint bland = 0
    cdef Py_ssize_t j, i, e, r
    cdef Py_ssize_t last = T.shape[1] - 1
    cdef double best, ratio, rmin, rhs, col, tmax
    if ncols == 0:
        return OPTIMAL
    while it[0] < max_iter:
        if target >= 0.0 and -T[k, last] <= target:
            return OPTIMAL
        e = -1
        if bland:
            for j in range(ncols):
                if T[k, j] < -tol:
                    e = j
                    break
            if e < 0:
                return OPTIMAL
        else:
            best = T[k, 0]
            e = 0
            for j in range(1, ncols):
                if T[k, j] < best:
                    best = T[k, j]
                    e = j
            if best >= -tol:
                return OPTIMAL
        r = -1
        if bland:
            # textbook ratio test, lowest basic index on ties (anti-cycling)
            rmin = 0.0
            for i in range(k):
                col = T[i, e]
                if col > tol:
                    rhs = T[i, last]
                    if rhs < 0.0:
                        rhs = 0.0
                    ratio = rhs / col
                    if r < 0 or ratio < rmin:
                        rmin = ratio
                        r = i
            if r < 0:
                return UNBOUNDED
            for i in range(k):
                col = T[i, e]
                if col > tol:
                    rhs = T[i, last]
                    if rhs < 0.0:
                        rhs = 0.0
                    ratio = rhs / col
                    if ratio <= rmin + tol and basis[i] < basis[r]:
                        r = i
        else:
            # Harris two-pass test: relaxed bound, then the largest pivot
            tmax = 0.0
            for i in range(k):
                col = T[i, e]
                if col > tol:
                    ratio = (T[i, last] + tol) / col
                    if r < 0 or ratio < tmax:
                        tmax = ratio
                        r = i
            if r < 0:
                return UNBOUNDED
            r = -1
            best = 0.0
            for i in range(k):
                col = T[i, e]
                if col > tol and T[i, last] / col <= tmax:
                    if r < 0 or col > best or (col == best and basis[i] < basis[r]):
                        best = col
                        r = i
            rhs = T[r, last]
            if rhs < 0.0:
                rhs = 0.0
            rmin = rhs / T[r, e]
        # a pivot that barely moves the objective counts as a stall
        if -T[k, e] * rmin <= tol * (1.0 + fabs(T[k, last])):
            stalled += 1
            if stalled >= bland_after:
                bland = 1
        else:
            stalled = 0
        _pivot(T, r, e)
        basis[r] = e
        it[0] += 1
    return ITERATION_LIMIT


def simplex_std(E, h, g, double tol=1e-9, int max_iter=5000, int bland_after=50):
    """Solve ``min g'y s.t. E y = h, y >= 0``; see ``_simplex_py.simplex_std``."""
    cdef cnp.ndarray[double, ndim=2] Ea = np.ascontiguousarray(E, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ha = np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t k = Ea.shape[0]
    cdef Py_ssize_t m = Ea.shape[1]
    cdef Py_ssize_t i, j, r
    cdef int it = 0
    cdef int status
    cdef double s, scale, acc
    sign_arr = np.where(ha < 0.0, -1.0, 1.0)
    cdef double[::1] sign = sign_arr
    T_arr = np.zeros((k + 1, m + k + 1))
    cdef double[:, ::1] T = T_arr
    basis_arr = np.arange(m, m + k, dtype=np.int64)
    cdef long long[::1] basis = basis_arr
    cdef Py_ssize_t last = m + k

    for i in range(k):
        s = sign[i]
        for j in range(m):
            T[i, j] = Ea[i, j] * s
        T[i, m + i] = 1.0
        T[i, last] = ha[i] * s
    # phase 1 objective row: column sums in row order
    for j in range(m):
        acc = 0.0
        for i in range(k):
            acc = acc + T[i, j]
        T[k, j] = -acc
    acc = 0.0
    for i in range(k):
        acc = acc + T[i, last]
    T[k, last] = -acc

    scale = 1.0
    for i in range(k):
        if fabs(ha[i]) + 1.0 > scale:
            scale = fabs(ha[i]) + 1.0
    with nogil:
        status = _run(T, basis, k, m, tol, max_iter, bland_after, &it, tol * scale)
    if status == ITERATION_LIMIT:
        return status, np.zeros(m), np.zeros(k), it
    if -T[k, last] > tol * scale * 10.0:
        return INFEASIBLE, np.zeros(m), np.zeros(k), it

    for r in range(k):
        if basis[r] >= m:
            for j in range(m):
                if fabs(T[r, j]) > tol:
                    _pivot(T, r, j)
                    basis[r] = j
                    it += 1
                    break

    # phase 2 objective row
    cdef double[::1] gext = np.zeros(m + k)
    for j in range(m):
        gext[j] = ga[j]
    for j in range(last + 1):
        acc = 0.0
        for i in range(k):
            acc = acc + gext[basis[i]] * T[i, j]
        if j < last:
            T[k, j] = gext[j] - acc
        else:
            T[k, j] = -acc
    with nogil:
        status = _run(T, basis, k, m, tol, max_iter, bland_after, &it, -1.0)

    y = np.zeros(m)
    for i in range(k):
        if basis[i] < m:
            y[basis[i]] = T[i, last] if T[i, last] > 0.0 else 0.0
    pi = -T_arr[k, m:m + k] * sign_arr
    return status, y, pi, it
