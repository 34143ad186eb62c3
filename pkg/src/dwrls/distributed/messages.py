"""The only value a worker sends to the coordinator."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import InputError
from ..solver import LocalEstimator

__all__ = ["EstimatorMessage", "LocalEstimator"]


@dataclass(frozen=True)
class EstimatorMessage:
    """Centers and coefficients of one server's fit plus its sample count."""

    server_id: int
    estimator: LocalEstimator
    sample_count: int

    def __post_init__(self):
        if not isinstance(self.estimator, LocalEstimator):
            raise InputError("messages carry LocalEstimator values only",
                             got=type(self.estimator).__name__)
        if self.sample_count != self.estimator.sample_count or self.sample_count < 1:
            raise InputError("sample_count disagrees with the estimator",
                             server_id=self.server_id)
