# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled local linear kernels (product Gaussian kernel, diagonal bandwidths).

Every routine mirrors a function of the same name in ``_core_py`` and must
return the same values up to floating point reassociation.
"""
import numpy as np

from libc.math cimport exp, fabs, isfinite

cdef enum:
    MAXP = 27

# exp(-ss/2) underflows to zero beyond this squared scaled distance
cdef double SS_CUT = 1400.0


cdef int _solve(double* A, double* b, int p) noexcept nogil:
    cdef int i, j, k, piv
    cdef double amax, f, t
    for k in range(p):
        piv = k
        amax = fabs(A[k * p + k])
        for i in range(k + 1, p):
            if fabs(A[i * p + k]) > amax:
                amax = fabs(A[i * p + k])
                piv = i
        if amax == 0.0 or not isfinite(amax):
            return -1
        if piv != k:
            for j in range(p):
                t = A[k * p + j]
                A[k * p + j] = A[piv * p + j]
                A[piv * p + j] = t
            t = b[k]
            b[k] = b[piv]
            b[piv] = t
        for i in range(k + 1, p):
            f = A[i * p + k] / A[k * p + k]
            if f != 0.0:
                for j in range(k, p):
                    A[i * p + j] -= f * A[k * p + j]
                b[i] -= f * b[k]
    for k in range(p - 1, -1, -1):
        t = b[k]
        for j in range(k + 1, p):
            t -= A[k * p + j] * b[j]
        b[k] = t / A[k * p + k]
    return 0


cdef int _accumulate(const double[:, ::1] X, const double* y, const double* inv_h,
                     const double* x, int q, Py_ssize_t skip, double mass_floor,
                     double jitter, double* A, double* b) noexcept nogil:
    """Fill the kernel-weighted normal equations in A, b; -1 when mass is too low."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef int p = q + 1
    cdef int r, c, k
    cdef double ss, u, w, mass = 0.0, tr = 0.0
    cdef double z[MAXP]
    for r in range(p * p):
        A[r] = 0.0
    for r in range(p):
        b[r] = 0.0
    z[0] = 1.0
    for i in range(n):
        if i == skip:
            continue
        ss = 0.0
        for k in range(q):
            u = (X[i, k] - x[k]) * inv_h[k]
            z[k + 1] = u
            ss += u * u
        if ss > SS_CUT:
            continue
        w = exp(-0.5 * ss)
        mass += w
        for r in range(p):
            for c in range(r, p):
                A[r * p + c] += w * z[r] * z[c]
            if y != NULL:
                b[r] += w * z[r] * y[i]
    if mass < mass_floor:
        return -1
    for r in range(p):
        tr += A[r * p + r]
        for c in range(r):
            A[r * p + c] = A[c * p + r]
    # ridge on the slope block only: constants stay exactly reproduced
    for r in range(1, p):
        A[r * p + r] += jitter * tr
    return 0


def loclin_eval(const double[:, ::1] X, const double[::1] y, const double[::1] h,
                const double[:, ::1] Q, double mass_floor_rel=1e-12, double jitter=1e-10):
    """Local linear fitted values at the rows of ``Q``; returns ``(values, ok)``."""
    cdef Py_ssize_t n = X.shape[0], m = Q.shape[0], t
    cdef int q = X.shape[1], k, p = X.shape[1] + 1
    if q + 1 > MAXP:
        raise ValueError("at most %d covariates supported" % (MAXP - 1))
    values = np.full(m, np.nan)
    ok = np.zeros(m, dtype=np.uint8)
    cdef double[::1] vv = values
    cdef unsigned char[::1] okv = ok
    cdef double inv_h[MAXP]
    cdef double A[MAXP * MAXP]
    cdef double b[MAXP]
    cdef double floor = mass_floor_rel * n
    for k in range(q):
        inv_h[k] = 1.0 / h[k]
    with nogil:
        for t in range(m):
            if _accumulate(X, &y[0], inv_h, &Q[t, 0], q, -1, floor, jitter, A, b) != 0:
                continue
            if _solve(A, b, p) != 0 or not isfinite(b[0]):
                continue
            vv[t] = b[0]
            okv[t] = 1
    return values, ok.astype(bool)


def loclin_weights(const double[:, ::1] X, const double[::1] h, const double[:, ::1] Q,
                   double mass_floor_rel=1e-12, double jitter=1e-10):
    """Equivalent-kernel weights ``W[t, i]`` with ``m_hat(Q[t]) = W[t] @ y``."""
    cdef Py_ssize_t n = X.shape[0], m = Q.shape[0], t, i
    cdef int q = X.shape[1], k, p = X.shape[1] + 1
    if q + 1 > MAXP:
        raise ValueError("at most %d covariates supported" % (MAXP - 1))
    W = np.zeros((m, n))
    ok = np.zeros(m, dtype=np.uint8)
    cdef double[:, ::1] Wv = W
    cdef unsigned char[::1] okv = ok
    cdef double inv_h[MAXP]
    cdef double A[MAXP * MAXP]
    cdef double b[MAXP]
    cdef double floor = mass_floor_rel * n
    cdef double ss, u, w, acc
    for k in range(q):
        inv_h[k] = 1.0 / h[k]
    with nogil:
        for t in range(m):
            if _accumulate(X, NULL, inv_h, &Q[t, 0], q, -1, floor, jitter, A, b) != 0:
                continue
            b[0] = 1.0
            for k in range(1, p):
                b[k] = 0.0
            if _solve(A, b, p) != 0:
                continue
            for i in range(n):
                ss = 0.0
                acc = b[0]
                for k in range(q):
                    u = (X[i, k] - Q[t, k]) * inv_h[k]
                    ss += u * u
                    acc += b[k + 1] * u
                if ss > SS_CUT:
                    continue
                w = exp(-0.5 * ss)
                Wv[t, i] = w * acc
            okv[t] = 1
    return W, ok.astype(bool)


def loo_predict(const double[:, ::1] X, const double[::1] y, const double[::1] h,
                double mass_floor_rel=1e-12, double jitter=1e-10):
    """Leave-one-out local linear predictions at every design point."""
    cdef Py_ssize_t n = X.shape[0], t
    cdef int q = X.shape[1], k, p = X.shape[1] + 1
    if q + 1 > MAXP:
        raise ValueError("at most %d covariates supported" % (MAXP - 1))
    pred = np.full(n, np.nan)
    ok = np.zeros(n, dtype=np.uint8)
    cdef double[::1] pv = pred
    cdef unsigned char[::1] okv = ok
    cdef double inv_h[MAXP]
    cdef double A[MAXP * MAXP]
    cdef double b[MAXP]
    cdef double floor = mass_floor_rel * (n - 1)
    for k in range(q):
        inv_h[k] = 1.0 / h[k]
    with nogil:
        for t in range(n):
            if _accumulate(X, &y[0], inv_h, &X[t, 0], q, t, floor, jitter, A, b) != 0:
                continue
            if _solve(A, b, p) != 0 or not isfinite(b[0]):
                continue
            pv[t] = b[0]
            okv[t] = 1
    return pred, ok.astype(bool)
