"""Weighted regularized least squares (kernel ridge regression with
quadrature weights) on a single server.

For data ``(x_i, y_i)`` with weights ``w_i`` the estimator
``f = sum_i a_i phi(x_i . )`` minimizes

    sum_i w_i (f(x_i) - y_i)^2 + lam * ||f||_phi^2,

whose coefficients satisfy ``(W Phi + lam I) a = W y``. The solve here is
the symmetric form ``(W^{1/2} Phi W^{1/2} + lam I) b = W^{1/2} y``,
``a = W^{1/2} b``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import InputError, SolveError
from .geometry import PointSet, _as_coords
from .kernels import Kernel, cross_matrix, gram_matrix, kernel_from_spec
from .quadrature import QuadratureRule

__all__ = [
    "LabeledData",
    "FitConfig",
    "LocalEstimator",
    "GridResult",
    "wrls_fit",
    "solve_weighted",
    "lemma_closed_form",
    "objective",
    "objective_gradient",
    "evaluate",
    "theoretical_lambda",
    "degree_floor",
    "rescale_lambda",
    "grid_search",
    "power_grid",
    "select_tied",
    "load_labeled",
    "save_labeled",
]

log = logging.getLogger(__name__)

TIE_TOL = 1e-10


@dataclass(frozen=True)
class LabeledData:
    inputs: PointSet
    outputs: np.ndarray

    def __post_init__(self):
        y = np.array(self.outputs, dtype=np.float64).ravel()
        if y.size != len(self.inputs):
            raise InputError("inputs and outputs differ in length",
                             n_inputs=len(self.inputs), n_outputs=y.size)
        if not np.all(np.isfinite(y)):
            raise InputError("outputs must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx) -> "LabeledData":
        idx = np.asarray(idx)
        return LabeledData(self.inputs.subset(idx), self.outputs[idx])


@dataclass(frozen=True)
class FitConfig:
    """Regularization ``lam``, quadrature degree and kernel for one fit."""

    lam: float
    quad_degree: int
    kernel: Kernel

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InputError("lambda must be positive and finite", lam=self.lam)
        if self.quad_degree < 0:
            raise InputError("quadrature degree must be >= 0", s=self.quad_degree)


@dataclass(frozen=True)
class LocalEstimator:
    """Kernel expansion ``sum_i coeffs[i] phi(centers[i] . x)``.

    Holds no outputs and no weights, so it can leave the server.
    """

    centers: PointSet
    coeffs: np.ndarray
    kernel: Kernel
    sample_count: int

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=np.float64).ravel()
        if a.size != len(self.centers):
            raise InputError("one coefficient per center is required")
        if self.sample_count < 1:
            raise InputError("sample_count must be >= 1", sample_count=self.sample_count)
        if self.kernel.d != self.centers.d:
            raise InputError("kernel and centers live on different spheres")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def kernel_tag(self) -> dict:
        return self.kernel.tag

    @property
    def d(self) -> int:
        return self.centers.d

    def evaluate(self, x):
        c = _as_coords(x)
        single = c.ndim == 1
        c = np.atleast_2d(c)
        if c.shape[1] != self.d + 1:
            raise InputError("evaluation point has the wrong dimension",
                             expected=self.d + 1, got=c.shape[1])
        live = self.coeffs != 0.0
        if not live.any():
            out = np.zeros(c.shape[0])
        else:
            out = np.empty(c.shape[0])
            ctr = self.centers.coords[live]
            a = self.coeffs[live]
            step = max(1, 4_000_000 // ctr.shape[0])
            for i in range(0, c.shape[0], step):
                out[i:i + step] = cross_matrix(self.kernel, c[i:i + step], ctr) @ a
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {
            "kernel_tag": self.kernel_tag,
            "sample_count": int(self.sample_count),
            "centers": self.centers.coords.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LocalEstimator":
        try:
            kernel = kernel_from_spec(obj["kernel_tag"])
            return cls(PointSet(np.asarray(obj["centers"], dtype=np.float64),
                                check_distinct=False),
                       np.asarray(obj["coeffs"], dtype=np.float64), kernel,
                       int(obj["sample_count"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed estimator: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LocalEstimator":
        return cls.from_dict(json.loads(text))


def load_labeled(path) -> LabeledData:
    """Read a CSV with header ``x0,...,xd,y``."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"data file not found: {path}", path=str(path))
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][-1].strip() != "y" or rows[0][0].strip() != "x0":
        raise InputError("data file header must be x0,...,xd,y", path=str(path))
    try:
        arr = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError:
        raise InputError("non-numeric value in data file", path=str(path)) from None
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] != len(rows[0]):
        raise InputError("data file has no rows or ragged rows", path=str(path))
    return LabeledData(PointSet(arr[:, :-1], label=path.stem, check_distinct=False),
                       arr[:, -1])


def save_labeled(data: LabeledData, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{i}" for i in range(data.inputs.d + 1)] + ["y"])
        for x, y in zip(data.inputs.coords, data.outputs):
            wr.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def evaluate(est, x):
    """Evaluate a local or global estimator at one point or many points."""
    return est.evaluate(x)


# ---------------------------------------------------------------------------
# fitting

def _check_rule(data: LabeledData, rule: QuadratureRule):
    if len(rule.nodes) != len(data) or not np.array_equal(rule.nodes.coords,
                                                          data.inputs.coords):
        raise InputError("quadrature nodes must be the data inputs in the same order",
                         n_rule=len(rule.nodes), n_data=len(data))


def solve_weighted(Phi, w, y, lam) -> np.ndarray:
    """Coefficients ``a`` with ``(W Phi + lam I) a = W y`` via the symmetric form.

    Nodes with zero weight get ``a_i = 0``.
    """
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    act = np.flatnonzero(w > 0.0)
    a = np.zeros(w.size)
    if act.size == 0:
        return a
    s = np.sqrt(w[act])
    P = Phi if act.size == w.size else Phi[np.ix_(act, act)]
    M = P * s[:, None]
    M *= s[None, :]
    M[np.diag_indices_from(M)] += lam
    rhs = s * y[act]
    try:
        b = linalg.cho_solve(linalg.cho_factor(M, lower=True, overwrite_a=True,
                                               check_finite=False), rhs)
    except linalg.LinAlgError:
        log.warning("Cholesky failed (lam=%.3e, n=%d); using least squares", lam, act.size)
        M = P * s[:, None]
        M *= s[None, :]
        M[np.diag_indices_from(M)] += lam
        b, *_ = linalg.lstsq(M, rhs, lapack_driver="gelsy")
    a[act] = s * b
    if not np.all(np.isfinite(a)):
        raise SolveError("linear solve produced non-finite coefficients", lam=lam,
                         n=int(act.size))
    return a


def wrls_fit(data: LabeledData, rule: QuadratureRule, cfg: FitConfig,
             gram: np.ndarray | None = None) -> LocalEstimator:
    """Fit the weighted regularized least-squares estimator on one server.

    Parameters
    ----------
    data : LabeledData
    rule : QuadratureRule
        Its nodes must be ``data.inputs`` in the same order. The weights
        are used as given.
    cfg : FitConfig
    gram : ndarray, optional
        Precomputed kernel matrix on ``data.inputs``.
    """
    _check_rule(data, rule)
    if data.inputs.d != cfg.kernel.d:
        raise InputError("kernel and data live on different spheres")
    Phi = gram_matrix(cfg.kernel, data.inputs) if gram is None else gram
    a = solve_weighted(Phi, rule.weights, data.outputs, cfg.lam)
    return LocalEstimator(data.inputs, a, cfg.kernel, len(data))


def lemma_closed_form(Phi, w, y, lam) -> np.ndarray:
    """Direct unsymmetric solve of ``(W Phi + lam I) a = W y``."""
    w = np.asarray(w, dtype=np.float64)
    A = w[:, None] * Phi
    A[np.diag_indices_from(A)] += lam
    return np.linalg.solve(A, w * np.asarray(y, dtype=np.float64))


def objective(Phi, w, y, lam, a) -> float:
    """``sum_i w_i ((Phi a)_i - y_i)^2 + lam a^T Phi a``."""
    f = Phi @ a
    return float(np.sum(w * (f - y) ** 2) + lam * (a @ f))


def objective_gradient(Phi, w, y, lam, a) -> np.ndarray:
    """Gradient of :func:`objective` with respect to ``a``."""
    return 2.0 * (Phi @ (w * (Phi @ a - y) + lam * a))


# ---------------------------------------------------------------------------
# parameter rules

def theoretical_lambda(n: int, gamma: float, d: int = 2) -> float:
    """``n ** (-2 gamma / (2 gamma + d))``."""
    if n < 1:
        raise InputError("n must be >= 1", n=n)
    if gamma <= d / 2.0:
        raise InputError("gamma must exceed d/2", gamma=gamma, d=d)
    return float(n) ** (-2.0 * gamma / (2.0 * gamma + d))


def degree_floor(lam: float, gamma: float) -> int:
    """Smallest integer ``s >= lam ** (-1/gamma)``.

    Values within a few ulps above an integer round down to it.
    """
    if lam <= 0 or gamma <= 0:
        raise InputError("need lam > 0 and gamma > 0", lam=lam, gamma=gamma)
    x = lam ** (-1.0 / gamma)
    return int(math.ceil(x * (1.0 - 1e-12)))


def rescale_lambda(lam: float, n_local: int, n_total: int) -> float:
    """``lam ** (log(n_total) / log(n_local))``.

    Maps ``n_local ** -p`` to ``n_total ** -p`` for every exponent ``p``.
    """
    if n_local < 2:
        raise InputError("n_local must be >= 2", n_local=n_local)
    if n_total < n_local:
        raise InputError("n_total must be >= n_local", n_local=n_local, n_total=n_total)
    if not 0.0 < lam < 1.0:
        raise InputError("lambda must lie in (0, 1)", lam=lam)
    if n_total == n_local:
        return float(lam)
    return float(math.exp(math.log(lam) * (math.log(n_total) / math.log(n_local))))


def power_grid(base: float, floor: float = 1e-10) -> np.ndarray:
    """``base ** -q`` for ``q = 0, 1, ...`` while the value exceeds ``floor``."""
    if base <= 1.0:
        raise InputError("base must exceed 1", base=base)
    out = []
    q = 0
    while base ** (-q) > floor:
        out.append(float(base) ** (-q))
        q += 1
    return np.array(out)


# ---------------------------------------------------------------------------
# grid search

@dataclass(frozen=True)
class GridResult:
    config: FitConfig
    rmse: float
    scores: np.ndarray  # (n_kernels, n_lambdas) holdout RMSE


def _path_rmse(Phi, w, y, lams, K_hold, y_hold):
    """Holdout RMSE for every lambda from one eigendecomposition."""
    act = np.flatnonzero(w > 0.0)
    s = np.sqrt(w[act])
    M = Phi[np.ix_(act, act)] * s[:, None]
    M *= s[None, :]
    evals, V = linalg.eigh(M, overwrite_a=True, check_finite=False)
    evals = np.clip(evals, 0.0, None)
    c = V.T @ (s * y[act])
    B = V @ (c[:, None] / (evals[:, None] + lams[None, :]))
    A = B * s[:, None]
    pred = K_hold[:, act] @ A
    return np.sqrt(np.mean((pred - y_hold[:, None]) ** 2, axis=0))


def select_tied(scores, lams, tol: float = TIE_TOL):
    """Index ``(kernel, lambda)`` of the best score; ties go to larger lambda."""
    best = scores.min()
    tied = np.argwhere(scores <= best + tol)
    ki, li = min(tied, key=lambda kl: (-lams[kl[1]], kl[0]))
    return int(ki), int(li)


def grid_search(data: LabeledData, rule: QuadratureRule, kernel_grid, lambda_grid,
                holdout: LabeledData) -> GridResult:
    """Pick the (kernel, lambda) pair with the smallest holdout RMSE.

    Pairs within ``TIE_TOL`` of the best RMSE count as ties; the largest
    lambda among them wins, then the earliest kernel.
    """
    kernels = list(kernel_grid)
    lams = np.asarray(list(lambda_grid), dtype=np.float64)
    if not kernels or lams.size == 0:
        raise InputError("kernel and lambda grids must be nonempty")
    if np.any(lams <= 0):
        raise InputError("lambda grid values must be positive")
    if len(holdout) == 0:
        raise InputError("holdout set is empty")
    _check_rule(data, rule)
    scores = np.empty((len(kernels), lams.size))
    for i, ker in enumerate(kernels):
        Phi = gram_matrix(ker, data.inputs)
        K_hold = cross_matrix(ker, holdout.inputs.coords, data.inputs.coords)
        scores[i] = _path_rmse(Phi, rule.weights, data.outputs, lams, K_hold,
                               holdout.outputs)
    if not np.all(np.isfinite(scores)):
        raise SolveError("grid search produced non-finite holdout errors")
    ki, li = select_tied(scores, lams)
    cfg = FitConfig(float(lams[li]), rule.degree, kernels[ki])
    log.debug("grid search: %s lam=%.3e rmse=%.4e", kernels[ki], lams[li], scores[ki, li])
    return GridResult(cfg, float(scores[ki, li]), scores)
