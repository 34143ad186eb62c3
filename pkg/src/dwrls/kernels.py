"""Zonal kernels on S^d defined by Fourier-Legendre coefficients.

A kernel ``phi(t)``, ``t = x . x'``, expands as

    phi(t) = sum_k phi_hat[k] * dim_harmonic(k, d) / |S^d| * P_k^{d+1}(t).

Series kernels (Sobolev, Bessel-series Gaussian) are evaluated from their
coefficients; closed-form kernels (Wendland, chordal Gaussian) compute their
coefficients lazily by Gauss-Jacobi projection, only for norm diagnostics.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .errors import InputError, NumericalError
from .geometry import _as_coords
from .harmonics import (
    BandLimited,
    dim_harmonic,
    legendre_all,
    legendre_series,
    sphere_volume,
)

__all__ = [
    "Kernel",
    "NormSpec",
    "make_sobolev",
    "make_gaussian_series",
    "make_gaussian_chordal",
    "make_wendland",
    "make_custom",
    "kernel_from_spec",
    "kernel_eval",
    "gram_matrix",
    "cross_matrix",
    "psi_norm",
    "wendland_profile",
    "bessel_i_scaled",
]

TAIL_TOL = 1e-10
MAX_TRUNCATION = 65536
# series longer than this are tabulated once and interpolated
TABLE_THRESHOLD = 512
TABLE_NODES = 2**15
PROJECTION_NODES = 256
MAX_BESSEL_ARG = 5000.0


def _dims(K: int, d: int) -> np.ndarray:
    """dim_harmonic(k, d) for k = 0..K as floats (exact ints for moderate K)."""
    if d == 2:
        return 2.0 * np.arange(K + 1) + 1.0
    return np.array([float(dim_harmonic(k, d)) for k in range(K + 1)])


class Kernel:
    """Spherical basis function.

    Parameters
    ----------
    d : int
        Sphere dimension.
    family : str
        ``sobolev``, ``gaussian_series``, ``gaussian_chordal``, ``wendland``
        or ``custom``.
    params : dict
        Family parameters (``gamma``, ``tau``, ``sigma``).
    coeff_fn : callable, optional
        Vectorized map from an integer array of degrees to ``phi_hat``.
        Closed-form kernels leave it empty and project on demand.
    closed_form : callable, optional
        Vectorized profile ``t -> phi(t)``.
    truncation : int, optional
        Series cutoff used when there is no closed form.
    support : float
        Smallest ``t`` where the profile can be nonzero (-1 for global support).
    """

    def __init__(self, d, family, params=None, coeff_fn=None, closed_form=None,
                 truncation=None, tail_bound=0.0, support=-1.0):
        if d < 1:
            raise InputError("d must be >= 1", d=d)
        if coeff_fn is None and closed_form is None:
            raise InputError("a kernel needs coefficients or a closed form")
        if closed_form is None and truncation is None:
            raise InputError("series kernels need a truncation")
        self.d = int(d)
        self.family = family
        self.params = dict(params or {})
        self._coeff_fn = coeff_fn
        self.closed_form = closed_form
        self.truncation = None if truncation is None else int(truncation)
        self.tail_bound = float(tail_bound)
        self.support = float(support)
        self._lock = threading.RLock()
        self._coeff_cache = np.empty(0)
        self._series_cache = None
        self._table = None

    # -- identity ---------------------------------------------------------
    @property
    def tag(self) -> dict:
        return {"family": self.family, "d": self.d, **self.params}

    def __repr__(self):
        p = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"Kernel({self.family}{', ' + p if p else ''}, d={self.d})"

    # -- coefficients -----------------------------------------------------
    def coefficients(self, K: int) -> np.ndarray:
        """``phi_hat[0..K]``; computed once and cached (thread safe)."""
        cache = self._coeff_cache
        if cache.size > K:
            return cache[:K + 1]
        with self._lock:
            if self._coeff_cache.size <= K:
                if self._coeff_fn is not None:
                    vals = np.asarray(self._coeff_fn(np.arange(K + 1)), dtype=np.float64)
                else:
                    vals = _project_coefficients(self, K)
                vals.setflags(write=False)
                self._coeff_cache = vals
            return self._coeff_cache[:K + 1]

    def coefficient(self, k: int) -> float:
        return float(self.coefficients(k)[k])

    def series_coefficients(self, K: int | None = None) -> np.ndarray:
        """Multipliers of ``P_k`` in the expansion: ``phi_hat[k] d_k / |S^d|``."""
        K = self.truncation if K is None else K
        if K is None:
            raise InputError("closed-form kernel: pass an explicit truncation")
        if K == self.truncation and self._series_cache is not None:
            return self._series_cache
        out = self.coefficients(K) * _dims(K, self.d) / sphere_volume(self.d)
        if K == self.truncation:
            self._series_cache = out
        return out

    # -- evaluation -------------------------------------------------------
    def series(self, t, K: int | None = None) -> np.ndarray:
        """Truncated Legendre series by Clenshaw summation (no tabulation)."""
        return legendre_series(self.series_coefficients(K), self.d, t)

    @property
    def tabulated(self) -> bool:
        return self.closed_form is None and self.truncation > TABLE_THRESHOLD

    def _spline(self):
        if self._table is None:
            with self._lock:
                if self._table is None:
                    theta = np.linspace(0.0, math.pi, TABLE_NODES + 1)
                    vals = self.series(np.cos(theta))
                    self._table = CubicSpline(theta, vals)
        return self._table

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)
        if self.closed_form is not None:
            return self.closed_form(t)
        if self.tabulated:
            return self._spline()(np.arccos(t))
        return self.series(t)

    def peak(self) -> float:
        """Value at ``t = 1``."""
        return float(self(np.array(1.0)))


@dataclass(frozen=True)
class NormSpec:
    """Interpolation norm with ``psi_hat[k] = phi_hat[k] ** r``."""

    r: float
    base: Kernel

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise InputError("r must lie in [0, 1]", r=self.r)

    def psi_hat(self, K: int) -> np.ndarray:
        if self.r == 0.0:
            return np.ones(K + 1)
        return self.base.coefficients(K) ** self.r


# ---------------------------------------------------------------------------
# families

def _sobolev_tail(K: int, d: int, gamma: float) -> float:
    """Integral upper bound on sum_{k>K} phi_hat_k d_k / |S^d|."""
    if d == 2:
        # d/dx [-(x^2+x+1)^(1-g)/(g-1)] = (2x+1)(x^2+x+1)^(-g)
        return (K * K + K + 1.0) ** (1.0 - gamma) / (gamma - 1.0) / (4.0 * math.pi)

    def f(x):
        dim = (2 * x + d - 1) * math.exp(math.lgamma(x + d - 1) - math.lgamma(x + 1)
                                          - math.lgamma(d))
        return dim * (x * (x + d - 1) + 1.0) ** (-gamma)

    val, _ = integrate.quad(f, K, np.inf, limit=200)
    return val / sphere_volume(d)


def make_sobolev(d: int, gamma: float, tol: float = TAIL_TOL,
                 max_truncation: int = MAX_TRUNCATION) -> Kernel:
    """Sobolev-type kernel with ``phi_hat_k = (k(k+d-1)+1)^(-gamma)``."""
    if gamma <= d / 2.0:
        raise InputError("Sobolev kernel needs gamma > d/2", gamma=gamma, d=d)

    def coeff(k):
        k = np.asarray(k, dtype=np.float64)
        return (k * (k + d - 1.0) + 1.0) ** (-gamma)

    # the tail bound is decreasing in K: double, then bisect
    hi = 1
    while _sobolev_tail(hi, d, gamma) >= tol and hi < max_truncation:
        hi *= 2
    hi = min(hi, max_truncation)
    tail = _sobolev_tail(hi, d, gamma)
    if tail >= tol:
        warnings.warn(
            f"Sobolev(gamma={gamma}, d={d}) series truncated at {hi} terms with tail "
            f"bound {tail:.2e} > {tol:.0e}", RuntimeWarning, stacklevel=2)
        K = hi
    else:
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _sobolev_tail(mid, d, gamma) < tol:
                hi = mid
            else:
                lo = mid
        K = hi
        tail = _sobolev_tail(K, d, gamma)
    return Kernel(d, "sobolev", {"gamma": float(gamma)}, coeff_fn=coeff,
                  truncation=K, tail_bound=tail)


def bessel_i_scaled(nu, z: float, rtol: float = 1e-14) -> np.ndarray:
    """``exp(-z) * I_nu(z)`` from the power series, summed in log space.

    Terms are positive, so the sum has no cancellation; it stops once the
    terms past the peak fall below ``rtol`` times the partial sum.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=np.float64))
    if z == 0.0:
        return np.where(nu == 0.0, 1.0, 0.0)
    lz = math.log(z / 2.0)
    out = np.zeros_like(nu)
    # the largest term sits near j ~ z/2; take enough terms past it
    jmax = int(z / 2.0 + 40.0 * math.sqrt(z / 2.0 + 1.0) + 60)
    j = np.arange(jmax + 1, dtype=np.float64)
    for i, v in enumerate(nu):
        logs = (v + 2.0 * j) * lz - special.gammaln(j + 1.0) - special.gammaln(v + j + 1.0) - z
        top = np.max(logs)
        terms = np.exp(logs - top)
        total = terms.sum()
        if terms[-1] > rtol * total:
            raise NumericalError("Bessel series did not converge", nu=float(v), z=z)
        out[i] = total * math.exp(top)
    return out


def make_gaussian_series(d: int, tau: float, tol: float = TAIL_TOL) -> Kernel:
    """Gaussian with width ``tau`` as a Bessel-coefficient series.

    ``phi_hat_k = 2 pi^{(d+1)/2} tau^{d-1} e^{-2/tau^2} I_{k+(d-1)/2}(2/tau^2)``,
    which sums to ``exp(-2 (1 - t) / tau^2) = exp(-|x - x'|^2 / tau^2)``.
    """
    if tau <= 0:
        raise InputError("tau must be positive", tau=tau)
    z = 2.0 / tau**2
    if z > MAX_BESSEL_ARG:
        raise InputError(
            f"tau={tau} is too small: the Bessel argument 2/tau^2={z:.3g} needs too many "
            f"series terms; use tau >= {math.sqrt(2.0 / MAX_BESSEL_ARG):.3g} or the "
            "closed-form gaussian_chordal kernel", tau=tau)
    const = 2.0 * math.pi ** ((d + 1) / 2.0) * tau ** (d - 1)
    half = (d - 1) / 2.0

    def coeff(k):
        return const * bessel_i_scaled(np.asarray(k, dtype=np.float64) + half, z)

    # ratio test: terms eventually decrease faster than geometric
    K = 0
    vol = sphere_volume(d)
    while True:
        block = np.arange(K, K + 64)
        terms = coeff(block) * _dims(int(block[-1]), d)[block] / vol
        done = False
        for i in range(1, terms.size):
            ratio = terms[i] / terms[i - 1] if terms[i - 1] > 0 else 0.0
            if block[i] > z and ratio < 0.5 and terms[i] * ratio / (1.0 - ratio) < tol:
                K = int(block[i])
                tail = terms[i] * ratio / (1.0 - ratio)
                done = True
                break
        if done:
            break
        K += 63

    def closed(t):
        return np.exp(-2.0 * (1.0 - t) / tau**2)

    return Kernel(d, "gaussian_series", {"tau": float(tau)}, coeff_fn=coeff,
                  closed_form=closed, truncation=K, tail_bound=tail)


def wendland_profile(u):
    """``(1-u)_+^8 (32u^3 + 25u^2 + 8u + 1)``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.clip(1.0 - u, 0.0, None)
    v2 = v * v
    v4 = v2 * v2
    return v4 * v4 * (((32.0 * u + 25.0) * u + 8.0) * u + 1.0)


def _chord(t):
    return np.sqrt(np.clip(2.0 - 2.0 * t, 0.0, None))


def make_wendland(d: int = 2) -> Kernel:
    """Compactly supported Wendland kernel in the chordal distance."""
    return Kernel(d, "wendland", {}, closed_form=lambda t: wendland_profile(_chord(t)),
                  support=0.5)


def make_gaussian_chordal(sigma: float, d: int = 2) -> Kernel:
    """``exp(-|x - x'|^2 / (2 sigma^2))`` with ``|x - x'|^2 = 2 - 2t``."""
    if sigma <= 0:
        raise InputError("sigma must be positive", sigma=sigma)
    s2 = float(sigma) ** 2
    return Kernel(d, "gaussian_chordal", {"sigma": float(sigma)},
                  closed_form=lambda t: np.exp(-(1.0 - t) / s2))


def make_custom(d: int, coeff_fn=None, closed_form=None, truncation=None) -> Kernel:
    return Kernel(d, "custom", {}, coeff_fn=coeff_fn, closed_form=closed_form,
                  truncation=truncation)


def kernel_from_spec(spec: dict, d: int = 2) -> Kernel:
    """Build a kernel from a config dict such as ``{"family": "sobolev", "gamma": 2}``."""
    try:
        family = spec["family"]
    except (KeyError, TypeError):
        raise InputError("kernel spec needs a 'family' field") from None
    d = int(spec.get("d", d))
    try:
        if family == "sobolev":
            return make_sobolev(d, float(spec["gamma"]))
        if family == "gaussian_series":
            return make_gaussian_series(d, float(spec["tau"]))
        if family == "gaussian_chordal":
            return make_gaussian_chordal(float(spec["sigma"]), d)
        if family == "wendland":
            return make_wendland(d)
    except KeyError as exc:
        raise InputError(f"kernel spec for {family!r} is missing {exc}") from None
    raise InputError(f"unknown kernel family {family!r}",
                     choices=["sobolev", "gaussian_series", "gaussian_chordal", "wendland"])


def _project_coefficients(kernel: Kernel, K: int) -> np.ndarray:
    """Fourier-Legendre coefficients of a closed-form kernel by quadrature.

    Substituting ``t = 1 - u^2/2`` (``u`` the chordal distance) turns the
    projection integral into a smooth integral in ``u``; the ``u^{d-1}``
    factor is absorbed into a Gauss-Jacobi weight.
    """
    d = kernel.d
    umax = math.sqrt(2.0 - 2.0 * kernel.support)
    half = (d - 2) / 2.0
    full = umax >= 2.0 - 1e-14
    alpha = half if full else 0.0
    x, w = special.roots_jacobi(PROJECTION_NODES, alpha, d - 1.0)
    u = umax * (1.0 + x) / 2.0
    t = 1.0 - u * u / 2.0
    if full:
        # (2 - u^2/2)^h = (2 - u)^h ((2 + u)/2)^h and 2 - u = 1 - x
        extra = ((2.0 + u) / 2.0) ** half
    else:
        extra = (2.0 - u * u / 2.0) ** half
    g = kernel.closed_form(t) * extra * 2.0 ** (-half) * (umax / 2.0) ** d
    P = legendre_all(K, d, t)
    return sphere_volume(d - 1) * (P @ (w * g)) if d > 1 else _project_circle(kernel, K)


def _project_circle(kernel: Kernel, K: int) -> np.ndarray:
    # d = 1: phi_hat_k = 2 * int_0^pi cos(k a) phi(cos a) da
    a, w = special.roots_legendre(PROJECTION_NODES)
    a = (a + 1.0) * math.pi / 2.0
    w = w * math.pi / 2.0
    vals = kernel.closed_form(np.cos(a))
    return np.array([2.0 * np.sum(w * vals * np.cos(k * a)) for k in range(K + 1)])


def kernel_eval(kernel: Kernel, t):
    """Kernel profile at ``t``; returns a float for scalar input."""
    out = kernel(t)
    return float(out) if np.ndim(out) == 0 else out


def _block_rows(n_rows, n_cols, budget=4_000_000):
    return max(1, min(n_rows, budget // max(n_cols, 1)))


def cross_matrix(kernel: Kernel, x, y) -> np.ndarray:
    """``K[i, j] = phi(x_i . y_j)`` for two point sets."""
    x = np.atleast_2d(_as_coords(x))
    y = np.atleast_2d(_as_coords(y))
    if x.shape[1] != kernel.d + 1 or y.shape[1] != kernel.d + 1:
        raise InputError("point dimension does not match the kernel", kernel_d=kernel.d)
    out = np.empty((x.shape[0], y.shape[0]))
    step = _block_rows(x.shape[0], y.shape[0])
    for i in range(0, x.shape[0], step):
        out[i:i + step] = kernel(x[i:i + step] @ y.T)
    return out


def gram_matrix(kernel: Kernel, pts) -> np.ndarray:
    """Symmetric kernel matrix on a point set.

    Only the upper triangle is evaluated; the lower triangle is a mirror, so
    the result is exactly symmetric. The diagonal is ``phi(1)``.
    """
    x = np.atleast_2d(_as_coords(pts))
    n = x.shape[0]
    if x.shape[1] != kernel.d + 1:
        raise InputError("point dimension does not match the kernel", kernel_d=kernel.d,
                         point_d=x.shape[1] - 1)
    G = np.empty((n, n))
    step = _block_rows(n, n)
    for i in range(0, n, step):
        j = i
        G[i:i + step, j:] = kernel(x[i:i + step] @ x[j:].T)
    for i in range(0, n, step):
        blk = G[i:i + step, i:i + step]
        iu = np.triu_indices(blk.shape[0], 1)
        blk[iu[1], iu[0]] = blk[iu]
        if i + step < n:
            G[i + step:, i:i + step] = G[i:i + step, i + step:].T
    np.fill_diagonal(G, kernel.peak())
    return G


def psi_norm(f: BandLimited, g: BandLimited, spec: NormSpec) -> float:
    """``(sum_k psi_hat_k^{-1} sum_ell (f_hat - g_hat)^2)^{1/2}``."""
    if f.d != g.d or f.d != spec.base.d:
        raise InputError("dimension mismatch between functions and kernel")
    diff = f - g
    if not diff.coeffs:
        return 0.0
    energy = diff.degree_energy()
    K = max(energy)
    psi = spec.psi_hat(K)
    total = 0.0
    for k, e in energy.items():
        if e == 0.0:
            continue
        if not psi[k] > 0.0 or not np.isfinite(1.0 / psi[k]):
            raise NumericalError("psi coefficient underflows at a degree with energy",
                                 degree=k, psi_hat=float(psi[k]))
        total += e / psi[k]
    return math.sqrt(total)
