"""Pure numpy versions of the compiled inner loops (reference + fallback)."""
import numpy as np


def clenshaw_legendre(coeffs, d, t):
    """Sum ``coeffs[k] * P_k^{d+1}(t)`` for every entry of ``t``."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    K = coeffs.shape[0] - 1
    if K < 0:
        return np.zeros_like(t)
    if K == 0:
        return np.full_like(t, coeffs[0])
    k = np.arange(K + 2, dtype=np.float64)
    alpha = np.zeros(K + 2)
    beta = np.zeros(K + 2)
    alpha[1:] = (2.0 * k[1:] + d - 1.0) / (k[1:] + d - 1.0)
    beta[1:] = -k[1:] / (k[1:] + d - 1.0)
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for j in range(K, 0, -1):
        b0 = coeffs[j] + (alpha[j] * t) * b1 + beta[j + 1] * b2
        b2 = b1
        b1 = b0
    return coeffs[0] + t * b1 + beta[1] * b2


def real_sph_harm(xyz, s, a_coef, b_coef):
    """Real orthonormal spherical harmonics up to degree ``s``.

    Column ``k*k + k + m`` holds degree ``k``, order ``m`` in ``-k..k``.
    """
    xyz = np.ascontiguousarray(xyz, dtype=np.float64)
    n = xyz.shape[0]
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    rho = np.hypot(x, y)
    safe = rho > 0.0
    cphi = np.where(safe, x / np.where(safe, rho, 1.0), 1.0)
    sphi = np.where(safe, y / np.where(safe, rho, 1.0), 0.0)
    out = np.zeros((n, (s + 1) ** 2))
    cm = np.ones(n)
    sm = np.zeros(n)
    pmm = np.full(n, np.sqrt(1.0 / (4.0 * np.pi)))
    sq2 = np.sqrt(2.0)
    for m in range(0, s + 1):
        if m > 0:
            cm, sm = cm * cphi - sm * sphi, sm * cphi + cm * sphi
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * rho * pmm
        p_km2 = np.zeros(n)
        p_km1 = pmm
        for k in range(m, s + 1):
            if k == m:
                p_k = pmm
            elif k == m + 1:
                p_k = np.sqrt(2.0 * m + 3.0) * z * pmm
            else:
                p_k = a_coef[k, m] * (z * p_km1 - b_coef[k, m] * p_km2)
            if k > m:
                p_km2, p_km1 = p_km1, p_k
            if m == 0:
                out[:, k * k + k] = p_k
            else:
                out[:, k * k + k + m] = sq2 * p_k * cm
                out[:, k * k + k - m] = sq2 * p_k * sm
    return out
