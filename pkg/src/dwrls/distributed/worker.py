"""Per-server fitting. Workers return messages, never data."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import InputError
from ..quadrature import QuadratureRule
from ..solver import FitConfig, LabeledData, wrls_fit
from .messages import EstimatorMessage

__all__ = ["Shard", "run_worker"]


@dataclass(frozen=True)
class Shard:
    server_id: int
    data: LabeledData
    rule: QuadratureRule
    cfg: FitConfig

    def __post_init__(self):
        if len(self.rule.nodes) != len(self.data):
            raise InputError("shard rule and data differ in size", server_id=self.server_id)


def run_worker(shard: Shard) -> EstimatorMessage:
    est = wrls_fit(shard.data, shard.rule, shard.cfg)
    return EstimatorMessage(shard.server_id, est, len(shard.data))
