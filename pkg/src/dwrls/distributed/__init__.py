"""Distributed fitting: partition, per-server fits, aggregation."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

from ..errors import DwrlsError
from ..quadrature import QuadratureRule, build_quadrature
from .config import ServerBoundWarning, cv_select, per_shard_config, server_bound
from .coordinator import GlobalEstimator, aggregate
from .messages import EstimatorMessage
from .partition import partition, partition_degenerate, partition_paper_scheme
from .worker import Shard, run_worker

__all__ = [
    "Shard",
    "EstimatorMessage",
    "GlobalEstimator",
    "ServerBoundWarning",
    "aggregate",
    "build_shards",
    "cv_select",
    "dwrls_fit",
    "partition",
    "partition_degenerate",
    "partition_paper_scheme",
    "per_shard_config",
    "run_worker",
    "server_bound",
]

log = logging.getLogger(__name__)


def build_shards(datas, configs, weights: str = "equal") -> list:
    """Attach a quadrature rule to every shard.

    ``weights="equal"`` uses ``|S^d| / n_j``; ``"quadrature"`` builds a
    positive rule of degree ``cfg.quad_degree`` on the shard inputs.
    """
    shards = []
    for j, (data, cfg) in enumerate(zip(datas, configs)):
        if weights == "quadrature" and cfg.quad_degree > 0:
            rule = build_quadrature(data.inputs, cfg.quad_degree)
        elif weights in ("equal", "quadrature"):
            rule = QuadratureRule.equal_weights(data.inputs)
        else:
            raise ValueError(f"unknown weights policy {weights!r}")
        shards.append(Shard(j, data, rule, cfg))
    return shards


def _safe_run(shard):
    try:
        return run_worker(shard), None
    except DwrlsError as exc:
        log.error("server %d failed: %s", shard.server_id, exc)
        return None, exc


def dwrls_fit(shards, jobs: int | None = None, allow_partial: bool = False) -> GlobalEstimator:
    """Fit every shard concurrently and aggregate the messages.

    Raises :class:`ShardFailure` listing the failed server ids unless
    ``allow_partial`` is set.
    """
    shards = list(shards)
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(shards) == 1:
        results = [_safe_run(s) for s in shards]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_run, shards))
    messages = [msg for msg, _ in results if msg is not None]
    failed = [s.server_id for s, (msg, _) in zip(shards, results) if msg is None]
    return aggregate(messages, failed, allow_partial=allow_partial)
