"""Positive quadrature rules on scattered nodes of S^2.

Weights are found from the moment system ``sum_i w_i Y_{k,l}(x_i) =
int Y_{k,l}`` for all ``k <= s``. The default construction returns the
nonnegative solution closest to equal weights (a least-distance program,
solved through NNLS); ``method="nnls"`` returns a plain NNLS solution.
All moment defects are reported divided by ``sqrt(4 pi)``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .errors import InputError, NoPositiveRule
from .geometry import PointSet
from .harmonics import BandLimited, eval_bandlimited, sph_harmonics_matrix, sphere_volume

__all__ = [
    "QuadratureRule",
    "build_quadrature",
    "default_degree",
    "max_buildable_degree",
    "verify_exactness",
    "mz_ratio",
    "least_distance_nnls",
    "save_rule",
    "load_rule",
]

log = logging.getLogger(__name__)

EXACTNESS_TOL = 1e-8
_SQRT4PI = math.sqrt(4.0 * math.pi)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: PointSet
    weights: np.ndarray
    degree: int
    residual: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (len(self.nodes),):
            raise InputError("one weight per node is required",
                             n_nodes=len(self.nodes), n_weights=w.size)
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise InputError("quadrature weights must be finite and nonnegative")
        vol = sphere_volume(self.nodes.d)
        if abs(w.sum() - vol) > EXACTNESS_TOL * vol:
            raise InputError("weights must integrate constants exactly",
                             total=float(w.sum()), expected=vol)
        if self.degree < 0:
            raise InputError("degree must be >= 0", degree=self.degree)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def equal_weights(cls, nodes: PointSet, degree: int = 0) -> "QuadratureRule":
        """Equal weights ``|S^d| / n``; exact to ``degree`` only for designs."""
        n = len(nodes)
        return cls(nodes, np.full(n, sphere_volume(nodes.d) / n), degree=degree)

    @property
    def c1_observed(self) -> float:
        """``max_i w_i * n / |S^d|`` -- the constant in ``w_i <= c1 / n``."""
        return float(self.weights.max() * len(self.nodes) / sphere_volume(self.nodes.d))

    def subset(self, idx) -> "QuadratureRule":
        raise NotImplementedError("a subset of a rule is not a rule; rebuild instead")

    def __len__(self):
        return len(self.nodes)


def default_degree(n: int) -> int:
    """Largest ``s`` with ``(s+1)^2 <= n/2``."""
    return max(0, int(math.floor(math.sqrt(n / 2.0))) - 1)


def max_buildable_degree(n: int) -> int:
    """Largest ``s`` with ``(s+1)^2 <= n`` (interpolation count on S^2)."""
    return max(0, math.isqrt(n) - 1)


def _moment_system(pts: PointSet, s: int):
    A = sph_harmonics_matrix(pts.coords, s).T / _SQRT4PI
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    return A, b


def _kkt_ok(E, f, u, tol=1e-9) -> bool:
    g = E.T @ (E @ u - f)
    scale = tol * max(1.0, float(np.abs(E).max()) * max(1.0, float(np.abs(f).max())))
    return bool(np.all(np.abs(g[u > 0.0]) <= scale) and np.all(g >= -scale))


def _nnls(E, f, maxiter):
    """NNLS with an optimality check.

    Some SciPy releases return points of ``optimize.nnls`` that violate the
    KKT conditions; those cases are re-solved with bounded-variable least
    squares.
    """
    u, _ = optimize.nnls(E, f, maxiter=maxiter)
    if _kkt_ok(E, f, u):
        return u
    log.debug("nnls missed the KKT conditions; retrying with BVLS")
    res = optimize.lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-14,
                              max_iter=maxiter)
    v = np.clip(res.x, 0.0, None)
    return v if np.linalg.norm(E @ v - f) <= np.linalg.norm(E @ u - f) else u


def least_distance_nnls(G, h):
    """Minimize ``||x||`` subject to ``G x >= h`` (Lawson-Hanson LDP via NNLS).

    Returns ``None`` when the constraints are infeasible.
    """
    m, p = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(p + 1)
    f[-1] = 1.0
    u = _nnls(E, f, 50 * max(m, 10))
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-12 or abs(r[-1]) <= 1e-14:
        return None
    return -r[:p] / r[-1]


def _clip_roundoff(w):
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if np.min(w) < -1e-13 * scale:
        return None
    return np.where(w < 0.0, 0.0, w)


def build_quadrature(pts: PointSet, s: int | None = None, method: str = "ldp",
                     tol: float = EXACTNESS_TOL) -> QuadratureRule:
    """Nonnegative weights on ``pts`` exact for spherical polynomials of degree <= s.

    Parameters
    ----------
    pts : PointSet
        Nodes on S^2.
    s : int, optional
        Degree of exactness; defaults to ``default_degree(len(pts))``.
    method : {"ldp", "nnls"}
        ``ldp`` returns the nonnegative exact weights closest (in Euclidean
        norm) to equal weights; ``nnls`` solves the column-equilibrated
        moment system by NNLS directly.
    tol : float
        Acceptance threshold on the normalized max moment defect.

    Raises
    ------
    NoPositiveRule
        If no nonnegative weights meet ``tol``; carries the best residual.
    """
    if pts.d != 2:
        raise InputError("quadrature construction is implemented on S^2 only", d=pts.d)
    n = len(pts)
    s = default_degree(n) if s is None else int(s)
    if s < 0:
        raise InputError("degree must be >= 0", s=s)
    # p in Pi_{s/2} vanishing on all nodes would give int p^2 = 0
    if (s // 2 + 1) ** 2 > n:
        raise NoPositiveRule(
            f"{n} nodes cannot carry a positive rule of degree {s}: need at least "
            f"{(s // 2 + 1) ** 2}", residual=float("inf"), n=n, degree=s)
    if s == 0:
        return QuadratureRule.equal_weights(pts, degree=0)
    A, b = _moment_system(pts, s)
    if method == "ldp":
        w = _solve_ldp(A, b, n)
    elif method == "nnls":
        w = _solve_nnls(A, b)
    else:
        raise InputError(f"unknown method {method!r}", choices=["ldp", "nnls"])
    if w is None:
        raise NoPositiveRule(f"no nonnegative weights of degree {s} on {n} nodes",
                             residual=float("inf"), n=n, degree=s)
    residual = float(np.max(np.abs(A @ w - b)))
    if not residual < tol:
        raise NoPositiveRule(
            f"best nonnegative weights leave moment defect {residual:.3e} >= {tol:.0e} "
            f"at degree {s}", residual=residual, n=n, degree=s)
    # the constant moment is exact to ``residual``; renormalize the last ulps
    w = w * (4.0 * math.pi / w.sum())
    rule = QuadratureRule(pts, w, degree=s, residual=residual)
    log.debug("quadrature n=%d s=%d residual=%.2e c1=%.3f", n, s, residual, rule.c1_observed)
    return rule


def _lstsq(A, r):
    # divide-and-conquer SVD occasionally fails to converge; gelss is the slower fallback
    try:
        return linalg.lstsq(A, r, lapack_driver="gelsd")[0]
    except linalg.LinAlgError:
        log.debug("gelsd did not converge; retrying with gelss")
        return linalg.lstsq(A, r, lapack_driver="gelss")[0]


def _svd(A):
    try:
        return linalg.svd(A, full_matrices=True, lapack_driver="gesdd")
    except linalg.LinAlgError:
        return linalg.svd(A, full_matrices=True, lapack_driver="gesvd")


def _solve_ldp(A, b, n):
    w0 = np.full(n, 4.0 * math.pi / n)
    r = b - A @ w0
    wp = w0 + _lstsq(A, r)
    if np.min(wp) >= 0.0:
        return wp
    # feasible set {wp + N c}: minimize ||c|| subject to wp + N c >= 0
    U, sv, Vt = _svd(A)
    rank = int(np.sum(sv > sv[0] * max(A.shape) * np.finfo(float).eps))
    N = Vt[rank:].T
    if N.shape[1] == 0:
        return _clip_roundoff(wp)
    c = least_distance_nnls(N, -wp)
    if c is None:
        return None
    return _clip_roundoff(wp + N @ c)


def _solve_nnls(A, b):
    scale = 1.0 / np.linalg.norm(A, axis=0)
    return _nnls(A * scale, b, 50 * A.shape[1]) * scale


def verify_exactness(rule: QuadratureRule, s_check: int) -> float:
    """Max normalized moment defect over all harmonics of degree <= s_check."""
    if s_check < 0:
        raise InputError("degree must be >= 0", s=s_check)
    A, b = _moment_system(rule.nodes, s_check)
    return float(np.max(np.abs(A @ rule.weights - b)))


def mz_ratio(rule: QuadratureRule, p: BandLimited):
    """Discrete vs continuous squared L2 norm of a spherical polynomial.

    Returns ``(sum_i w_i p(x_i)^2, sum of squared coefficients, ratio)``.
    """
    cont = float(sum(v * v for v in p.coeffs.values()))
    if cont == 0.0:
        raise InputError("mz_ratio of the zero polynomial is undefined")
    vals = eval_bandlimited(p, rule.nodes.coords)
    disc = float(np.sum(rule.weights * vals * vals))
    return disc, cont, disc / cont


# ---------------------------------------------------------------------------
# rule files: CSV x0,x1,x2,w plus a JSON sidecar next to it

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_rule(rule: QuadratureRule, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{i}" for i in range(rule.nodes.d + 1)] + ["w"])
        for x, w in zip(rule.nodes.coords, rule.weights):
            wr.writerow([repr(float(v)) for v in x] + [repr(float(w))])
    meta = {"degree": rule.degree, "residual": rule.residual,
            "c1_observed": rule.c1_observed}
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")


def load_rule(path) -> QuadratureRule:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"rule file not found: {path}", path=str(path))
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1].strip() != "w":
        raise InputError("rule file header must be x0,...,xd,w", path=str(path))
    try:
        arr = np.array([[float(c) for c in r] for r in rows[1:] if r])
    except ValueError:
        raise InputError("non-numeric value in rule file", path=str(path)) from None
    if arr.size == 0:
        raise InputError("rule file has no rows", path=str(path))
    degree, residual = 0, 0.0
    side = _sidecar(path)
    if side.is_file():
        meta = json.loads(side.read_text())
        degree = int(meta.get("degree", 0))
        residual = float(meta.get("residual", 0.0))
    return QuadratureRule(PointSet(arr[:, :-1], label=path.stem), arr[:, -1],
                          degree=degree, residual=residual)
