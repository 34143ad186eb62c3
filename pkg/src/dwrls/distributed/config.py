"""Per-server parameter choice: the theoretical schedule or local
cross-validation followed by lambda rescaling."""
from __future__ import annotations

import logging
import warnings

import numpy as np

from ..errors import InputError, NoPositiveRule
from ..quadrature import QuadratureRule, max_buildable_degree
from ..rng import stream
from ..solver import (FitConfig, GridResult, LabeledData, degree_floor, grid_search,
                      rescale_lambda, select_tied, theoretical_lambda)

__all__ = ["per_shard_config", "server_bound", "cv_select", "CV_CAP", "CV_FOLDS"]

log = logging.getLogger(__name__)

CV_CAP = 2000
CV_FOLDS = 5


class ServerBoundWarning(UserWarning):
    """More servers than the sample-size bound allows (constant 1)."""


def server_bound(n_total: int, gamma: float, d: int = 2) -> float:
    """``n ** ((2 gamma - d) / (2 gamma + d))``."""
    return float(n_total) ** ((2.0 * gamma - d) / (2.0 * gamma + d))


def cv_select(data: LabeledData, kernel_grid, lambda_grid, rng, cap: int = CV_CAP,
              folds: int = CV_FOLDS):
    """K-fold grid search on one shard with equal weights on each training fold.

    At most ``cap * folds / (folds - 1)`` samples enter the pool, so no
    training fold exceeds ``cap``. Fold scores are mean squared holdout
    errors averaged over folds. Returns ``(GridResult, n_train)`` where
    ``n_train`` is the training-fold size used for lambda rescaling.
    """
    n = len(data)
    if n < folds:
        raise InputError("shard has fewer samples than cross-validation folds",
                         n=n, folds=folds)
    pool_size = min(n, (cap * folds) // (folds - 1))
    pool = rng.permutation(n)[:pool_size]
    chunks = np.array_split(pool, folds)
    mse = None
    res = None
    for i in range(folds):
        hold = np.sort(chunks[i])
        train = np.sort(np.concatenate([c for j, c in enumerate(chunks) if j != i]))
        tr = data.subset(train)
        rule = QuadratureRule.equal_weights(tr.inputs)
        res = grid_search(tr, rule, kernel_grid, lambda_grid, data.subset(hold))
        part = res.scores ** 2 * hold.size
        mse = part if mse is None else mse + part
    scores = np.sqrt(mse / pool_size)
    lams = np.asarray(list(lambda_grid), dtype=np.float64)
    ki, li = select_tied(scores, lams)
    kernels = list(kernel_grid)
    cfg = FitConfig(float(lams[li]), 0, kernels[ki])
    n_train = pool_size - pool_size // folds
    return GridResult(cfg, float(scores[ki, li]), scores), n_train


def per_shard_config(shards, gamma=None, mode: str = "theoretical", *, kernel=None,
                     kernel_grid=None, lambda_grid=None, seed: int = 0, d: int = 2,
                     cv_cap: int = CV_CAP) -> list:
    """One :class:`FitConfig` per shard.

    Parameters
    ----------
    shards : list of LabeledData
    gamma : float, optional
        Smoothness index; required for ``theoretical`` and for the
        server-count warning.
    mode : {"theoretical", "cv"}
        ``theoretical`` uses ``lam = N ** (-2 gamma / (2 gamma + d))`` with
        ``N`` the total sample count and ``s = ceil(lam ** (-1/gamma))``.
        ``cv`` picks ``(kernel, lam)`` on each shard by holdout search and
        rescales ``lam`` from the training size to ``N``.
    """
    shards = list(shards)
    if not shards:
        raise InputError("no shards")
    if any(s.inputs.d != d for s in shards):
        raise InputError("all shards must live on the same sphere", d=d)
    n_total = sum(len(s) for s in shards)
    m = len(shards)
    if gamma is not None:
        if gamma <= d / 2.0:
            raise InputError("gamma must exceed d/2", gamma=gamma, d=d)
        bound = server_bound(n_total, gamma, d)
        if m > bound:
            warnings.warn(f"{m} servers exceed the bound {bound:.1f} for N={n_total}",
                          ServerBoundWarning, stacklevel=2)

    if mode == "theoretical":
        if gamma is None or kernel is None:
            raise InputError("theoretical mode needs gamma and kernel")
        lam = theoretical_lambda(n_total, gamma, d)
        s = degree_floor(lam, gamma)
        for j, sh in enumerate(shards):
            ceiling = max_buildable_degree(len(sh))
            if s > ceiling:
                raise NoPositiveRule(
                    f"server {j}: degree {s} exceeds the buildable degree {ceiling} "
                    f"for {len(sh)} samples", server_id=j, degree=s, n=len(sh))
        return [FitConfig(lam, s, kernel) for _ in shards]

    if mode == "cv":
        if not kernel_grid or lambda_grid is None or len(lambda_grid) == 0:
            raise InputError("cv mode needs kernel_grid and lambda_grid")
        out = []
        for j, sh in enumerate(shards):
            res, n_train = cv_select(sh, kernel_grid, lambda_grid,
                                     stream(seed, f"cv-split/{j}"), cap=cv_cap)
            lam = res.config.lam
            if lam < 1.0 and n_train >= 2:
                lam = rescale_lambda(lam, n_train, n_total)
            log.debug("server %d: %s lam %.3e -> %.3e", j, res.config.kernel,
                      res.config.lam, lam)
            out.append(FitConfig(lam, 0, res.config.kernel))
        return out

    raise InputError(f"unknown mode {mode!r}", choices=["theoretical", "cv"])
