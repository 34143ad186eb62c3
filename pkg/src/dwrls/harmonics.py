"""Spherical harmonics: dimensions, normalized Legendre polynomials, real
harmonics on S^2 and band-limited functions.

Measure convention: Lebesgue surface measure with total mass
``sphere_volume(d)`` (4*pi on S^2); harmonics are orthonormal for it.

Ordering of real harmonics on S^2: degree ``k`` ascending, then order
``ell = 1 .. 2k+1`` ascending, where ``ell = m + k + 1`` for the usual
signed order ``m = -k .. k`` (negative ``m`` are the sine harmonics).
The flat column index is ``k*k + ell - 1``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _backend
from .errors import InputError
from .geometry import _as_coords

__all__ = [
    "HarmonicIndex",
    "BandLimited",
    "dim_harmonic",
    "dim_polynomials",
    "sphere_volume",
    "legendre",
    "legendre_all",
    "legendre_series",
    "eval_real_sph_harmonics",
    "sph_harmonics_matrix",
    "eval_bandlimited",
    "flat_index",
]

_MAX_EXACT = 2**62


def dim_harmonic(k: int, d: int) -> int:
    """Dimension of the space of degree-k spherical harmonics on S^d."""
    k, d = int(k), int(d)
    if k < 0 or d < 1:
        raise InputError("need k >= 0 and d >= 1", k=k, d=d)
    if k == 0:
        return 1
    value, rem = divmod((2 * k + d - 1) * math.comb(k + d - 1, k), k + d - 1)
    if rem:
        raise ArithmeticError("non-integral harmonic dimension")
    if value > _MAX_EXACT:
        raise OverflowError(f"dim_harmonic({k}, {d}) exceeds 2**62")
    return value


def dim_polynomials(s: int, d: int) -> int:
    """Dimension of spherical polynomials of degree <= s on S^d."""
    return sum(dim_harmonic(k, d) for k in range(s + 1))


def sphere_volume(d: int) -> float:
    """Surface area of S^d: 2 pi^{(d+1)/2} / Gamma((d+1)/2)."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def _clamp(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < -1.0 - 1e-12) | (t > 1.0 + 1e-12)):
        warnings.warn("Legendre argument outside [-1, 1]; clamping", RuntimeWarning,
                      stacklevel=3)
    return np.clip(t, -1.0, 1.0)


def legendre_all(kmax: int, d: int, t) -> np.ndarray:
    """Rows ``P_0^{d+1}(t) .. P_kmax^{d+1}(t)`` (normalized, ``P_k(1) = 1``)."""
    t = _clamp(t)
    out = np.empty((kmax + 1,) + t.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = t
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + d - 1) * t * out[k] - k * out[k - 1]) / (k + d - 1)
    return out


def legendre(k: int, d: int, t):
    """Normalized Legendre polynomial P_k^{d+1}(t) via the three-term recurrence."""
    if k < 0 or d < 1:
        raise InputError("need k >= 0 and d >= 1", k=k, d=d)
    res = legendre_all(k, d, t)[k]
    return float(res) if res.ndim == 0 else res


def legendre_series(coeffs, d: int, t) -> np.ndarray:
    """Evaluate ``sum_k coeffs[k] P_k^{d+1}(t)`` by Clenshaw summation."""
    t = _clamp(t)
    flat = np.ascontiguousarray(t.ravel())
    out = _backend.clenshaw_legendre(np.ascontiguousarray(coeffs, dtype=np.float64), int(d), flat)
    return np.asarray(out).reshape(t.shape)


@lru_cache(maxsize=32)
def _recurrence(s: int):
    a = np.zeros((s + 1, s + 1))
    b = np.zeros((s + 1, s + 1))
    for m in range(s + 1):
        for k in range(m + 2, s + 1):
            a[k, m] = math.sqrt((4.0 * k * k - 1.0) / (k * k - m * m))
            b[k, m] = math.sqrt(((k - 1.0) ** 2 - m * m) / (4.0 * (k - 1.0) ** 2 - 1.0))
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def sph_harmonics_matrix(x, s: int) -> np.ndarray:
    """Matrix ``Y[i, j]`` of real harmonics (flat index ``j``) at points ``x[i]`` on S^2."""
    xyz = np.atleast_2d(_as_coords(x))
    if xyz.shape[1] != 3:
        raise InputError("real spherical harmonics are implemented on S^2 only",
                         d=xyz.shape[1] - 1)
    if s < 0:
        raise InputError("degree must be >= 0", s=s)
    a, b = _recurrence(int(s))
    return np.asarray(_backend.real_sph_harm(np.ascontiguousarray(xyz), int(s), a, b))


def eval_real_sph_harmonics(x, s: int) -> np.ndarray:
    """All ``(s+1)**2`` real harmonics at a single point, projected onto S^2."""
    c = _as_coords(x)
    if c.ndim != 1:
        raise InputError("expected a single point")
    r = float(np.linalg.norm(c))
    if not r > 0.0:
        raise InputError("point must be nonzero")
    c = c / r
    return sph_harmonics_matrix(c[None, :], s)[0]


def flat_index(k: int, ell: int) -> int:
    return k * k + ell - 1


@dataclass(frozen=True)
class HarmonicIndex:
    k: int
    ell: int
    d: int = 2

    def __post_init__(self):
        if self.k < 0 or not 1 <= self.ell <= dim_harmonic(self.k, self.d):
            raise InputError("invalid harmonic index", k=self.k, ell=self.ell, d=self.d)


@dataclass(frozen=True)
class BandLimited:
    """Finite expansion ``sum f_hat[k, ell] Y_{k, ell}``.

    ``coeffs`` maps ``(k, ell)`` to the coefficient.
    """

    d: int
    max_degree: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.coeffs).items():
            k, ell = (key.k, key.ell) if isinstance(key, HarmonicIndex) else map(int, key)
            if k > self.max_degree:
                raise InputError("coefficient above max_degree", k=k, max_degree=self.max_degree)
            HarmonicIndex(k, ell, self.d)
            clean[(k, ell)] = float(val)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_vector(cls, vec, d: int = 2) -> "BandLimited":
        """Build from a flat S^2 coefficient vector of length (s+1)**2."""
        vec = np.asarray(vec, dtype=np.float64)
        s = int(round(math.sqrt(vec.size))) - 1
        if d != 2 or (s + 1) ** 2 != vec.size:
            raise InputError("flat vectors are S^2 only and must have length (s+1)^2")
        coeffs = {}
        for k in range(s + 1):
            for ell in range(1, 2 * k + 2):
                v = vec[flat_index(k, ell)]
                if v != 0.0:
                    coeffs[(k, ell)] = v
        return cls(d=2, max_degree=s, coeffs=coeffs)

    def as_vector(self, s: int | None = None) -> np.ndarray:
        if self.d != 2:
            raise InputError("flat vectors are S^2 only")
        s = self.max_degree if s is None else s
        out = np.zeros((s + 1) ** 2)
        for (k, ell), v in self.coeffs.items():
            if k <= s:
                out[flat_index(k, ell)] = v
        return out

    def degree_energy(self) -> dict:
        """Sum of squared coefficients per degree."""
        out: dict = {}
        for (k, _), v in self.coeffs.items():
            out[k] = out.get(k, 0.0) + v * v
        return out

    def __sub__(self, other: "BandLimited") -> "BandLimited":
        if self.d != other.d:
            raise InputError("dimension mismatch")
        keys = set(self.coeffs) | set(other.coeffs)
        c = {key: self.coeffs.get(key, 0.0) - other.coeffs.get(key, 0.0) for key in keys}
        return BandLimited(self.d, max(self.max_degree, other.max_degree), c)

    def __call__(self, x):
        return eval_bandlimited(self, x)

    def to_json(self) -> str:
        rows = [[k, ell, v] for (k, ell), v in sorted(self.coeffs.items())]
        return json.dumps({"d": self.d, "max_degree": self.max_degree, "coeffs": rows})

    @classmethod
    def from_json(cls, text: str) -> "BandLimited":
        obj = json.loads(text)
        try:
            coeffs = {(int(k), int(ell)): float(v) for k, ell, v in obj["coeffs"]}
            return cls(d=int(obj["d"]), max_degree=int(obj["max_degree"]), coeffs=coeffs)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed band-limited JSON: {exc}") from None


def eval_bandlimited(f: BandLimited, x):
    """Evaluate at one point (returns float) or at many points (returns array)."""
    if f.d != 2:
        raise InputError("evaluation uses real harmonics on S^2 only", d=f.d)
    c = _as_coords(x)
    single = c.ndim == 1
    if not f.coeffs:
        return 0.0 if single else np.zeros(np.atleast_2d(c).shape[0])
    vals = sph_harmonics_matrix(np.atleast_2d(c), f.max_degree) @ f.as_vector()
    return float(vals[0]) if single else vals
