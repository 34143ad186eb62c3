# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Both functions mirror ``dwrls._core_py`` exactly (same arguments, same
outputs); the pure-Python module is the reference and the fallback.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef enum:
    BLOCK = 32


def clenshaw_legendre(const double[::1] coeffs, int d, const double[::1] t):
    """Sum ``coeffs[k] * P_k^{d+1}(t)`` for every entry of ``t``."""
    cdef Py_ssize_t K = coeffs.shape[0] - 1
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t i0, i, j, k, nb
    cdef double[::1] out = np.zeros(n, dtype=np.float64)
    cdef double[::1] alpha = np.zeros(K + 2, dtype=np.float64)
    cdef double[::1] beta = np.zeros(K + 2, dtype=np.float64)
    # independent recurrences for a block of points run side by side
    cdef double x[BLOCK]
    cdef double b0[BLOCK]
    cdef double b1[BLOCK]
    cdef double b2[BLOCK]
    cdef double ck, ak, bk
    if K < 0:
        return np.asarray(out)
    if K == 0:
        for i in range(n):
            out[i] = coeffs[0]
        return np.asarray(out)
    for k in range(1, K + 2):
        alpha[k] = (2.0 * k + d - 1.0) / (k + d - 1.0)
        beta[k] = -k / (k + d - 1.0)
    for i0 in range(0, n, BLOCK):
        nb = min(BLOCK, n - i0)
        for j in range(nb):
            x[j] = t[i0 + j]
            b1[j] = 0.0
            b2[j] = 0.0
        for k in range(K, 0, -1):
            ck = coeffs[k]
            ak = alpha[k]
            bk = beta[k + 1]
            for j in range(nb):
                b0[j] = ck + ak * x[j] * b1[j] + bk * b2[j]
                b2[j] = b1[j]
                b1[j] = b0[j]
        for j in range(nb):
            out[i0 + j] = coeffs[0] + x[j] * b1[j] + beta[1] * b2[j]
    return np.asarray(out)


def real_sph_harm(const double[:, ::1] xyz, int s,
                  const double[:, ::1] a_coef, const double[:, ::1] b_coef):
    """Real orthonormal spherical harmonics up to degree ``s``.

    Column ``k*k + k + m`` holds degree ``k``, order ``m`` in ``-k..k``.
    ``a_coef``/``b_coef`` are the three-term recurrence factors indexed
    ``[k, m]``.
    """
    cdef Py_ssize_t n = xyz.shape[0]
    cdef Py_ssize_t ncol = (s + 1) * (s + 1)
    cdef double[:, ::1] out = np.zeros((n, ncol), dtype=np.float64)
    cdef double[::1] pmm = np.zeros(s + 1, dtype=np.float64)
    cdef double[::1] cm = np.zeros(s + 1, dtype=np.float64)
    cdef double[::1] sm = np.zeros(s + 1, dtype=np.float64)
    cdef Py_ssize_t i, k, m
    cdef double x, y, z, rho, cphi, sphi, p_km2, p_km1, p_k, sq2, inv4pi
    sq2 = sqrt(2.0)
    inv4pi = sqrt(1.0 / (4.0 * 3.141592653589793))
    for i in range(n):
        x = xyz[i, 0]
        y = xyz[i, 1]
        z = xyz[i, 2]
        rho = sqrt(x * x + y * y)
        if rho > 0.0:
            cphi = x / rho
            sphi = y / rho
        else:
            cphi = 1.0
            sphi = 0.0
        cm[0] = 1.0
        sm[0] = 0.0
        for m in range(1, s + 1):
            cm[m] = cm[m - 1] * cphi - sm[m - 1] * sphi
            sm[m] = sm[m - 1] * cphi + cm[m - 1] * sphi
        pmm[0] = inv4pi
        for m in range(1, s + 1):
            pmm[m] = sqrt((2.0 * m + 1.0) / (2.0 * m)) * rho * pmm[m - 1]
        for m in range(0, s + 1):
            p_km2 = 0.0
            p_km1 = pmm[m]
            for k in range(m, s + 1):
                if k == m:
                    p_k = pmm[m]
                elif k == m + 1:
                    p_k = sqrt(2.0 * m + 3.0) * z * pmm[m]
                else:
                    p_k = a_coef[k, m] * (z * p_km1 - b_coef[k, m] * p_km2)
                if k > m:
                    p_km2 = p_km1
                    p_km1 = p_k
                if m == 0:
                    out[i, k * k + k] = p_k
                else:
                    out[i, k * k + k + m] = sq2 * p_k * cm[m]
                    out[i, k * k + k - m] = sq2 * p_k * sm[m]
    return np.asarray(out)
