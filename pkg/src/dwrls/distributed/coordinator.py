"""Aggregation of local estimators into the global estimator.

This module sees :class:`EstimatorMessage` values only; it has no access
to sample outputs or quadrature weights.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, ShardFailure
from .messages import EstimatorMessage, LocalEstimator

__all__ = ["GlobalEstimator", "aggregate"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalEstimator:
    """Sample-size weighted average of local estimators.

    ``components`` is a tuple of ``(weight, LocalEstimator)`` pairs with
    ``weight = sample_count / total_samples``.
    """

    components: tuple
    total_samples: int

    def __post_init__(self):
        comps = tuple((float(w), est) for w, est in self.components)
        if not comps:
            raise InputError("a global estimator needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise InputError("component weights must be positive")
        if abs(math.fsum(w for w, _ in comps) - 1.0) > 1e-12:
            raise InputError("component weights must sum to 1")
        for w, est in comps:
            if abs(w - est.sample_count / self.total_samples) > 1e-12:
                raise InputError("component weight differs from its sample share")
        if len({est.d for _, est in comps}) != 1:
            raise InputError("components live on different spheres")
        object.__setattr__(self, "components", comps)

    @property
    def d(self) -> int:
        return self.components[0][1].d

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def evaluate(self, x):
        out = None
        for w, est in self.components:
            v = w * np.asarray(est.evaluate(x))
            out = v if out is None else out + v
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {
            "total_samples": int(self.total_samples),
            "components": [{"weight": w, "estimator": est.to_dict()}
                           for w, est in self.components],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GlobalEstimator":
        try:
            comps = [(c["weight"], LocalEstimator.from_dict(c["estimator"]))
                     for c in obj["components"]]
            return cls(tuple(comps), int(obj["total_samples"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed global estimator: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GlobalEstimator":
        return cls.from_dict(json.loads(text))


def aggregate(messages, failed=(), allow_partial: bool = False) -> GlobalEstimator:
    """Combine worker messages; the reduction order is fixed by server id.

    Parameters
    ----------
    messages : iterable of EstimatorMessage
    failed : iterable of int
        Server ids whose fit did not produce a message.
    allow_partial : bool
        If true, weights are renormalized over the surviving servers
        instead of raising.
    """
    msgs = list(messages)
    for msg in msgs:
        if not isinstance(msg, EstimatorMessage):
            raise InputError("the coordinator accepts EstimatorMessage values only",
                             got=type(msg).__name__)
    failed = sorted(failed)
    if failed and not allow_partial:
        raise ShardFailure(f"{len(failed)} server(s) failed: {failed}", failed)
    if not msgs:
        raise ShardFailure("no server produced an estimator", failed)
    ids = [m.server_id for m in msgs]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate server ids among messages")
    if failed:
        log.warning("renormalizing over %d surviving servers; failed: %s", len(msgs), failed)
    msgs.sort(key=lambda m: m.server_id)
    total = sum(m.sample_count for m in msgs)
    comps = tuple((m.sample_count / total, m.estimator) for m in msgs)
    return GlobalEstimator(comps, total)
