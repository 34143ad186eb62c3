"""Splitting the ten rotated sample groups among ``m`` servers."""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..geometry import PointSet
from ..rng import stream
from ..solver import LabeledData

__all__ = ["partition_paper_scheme", "partition_degenerate", "partition", "split_counts"]


def _concat(groups):
    coords = np.vstack([g.inputs.coords for g in groups])
    y = np.concatenate([g.outputs for g in groups])
    return coords, y


def _split(data: LabeledData, parts: int, rng, name: str):
    if len(data) < parts:
        raise InputError(f"{name} has {len(data)} samples, cannot split into {parts}",
                         group=name, size=len(data), parts=parts)
    if parts == 1:
        return [data]
    idx = rng.permutation(len(data))
    return [data.subset(np.sort(chunk)) for chunk in np.array_split(idx, parts)]


def split_counts(m: int, n_groups: int = 10, chosen=()) -> list:
    """Number of shards each group is split into; ``chosen`` get the larger count."""
    lo, hi = m // n_groups, -(-m // n_groups)
    return [hi if g in set(chosen) else lo for g in range(n_groups)]


def partition_paper_scheme(groups, m: int, seed: int) -> list:
    """Redistribute ten groups over ``m >= 10`` servers.

    With ``tau = m mod 10``, ``tau`` randomly chosen groups are each split
    into ``ceil(m/10)`` shards and the rest into ``floor(m/10)`` shards.
    Shards are returned group by group.
    """
    groups = list(groups)
    if len(groups) != 10:
        raise InputError("the scheme expects exactly 10 groups", n_groups=len(groups))
    if m < 10:
        raise InputError("the scheme needs m >= 10 servers", m=m)
    for j, g in enumerate(groups):
        if len(g) == 0:
            raise InputError(f"group {j} is empty", group=j)
    tau = m % 10
    chosen = ()
    if tau:
        chosen = tuple(stream(seed, "partition/groups").choice(10, size=tau, replace=False))
    counts = split_counts(m, 10, chosen)
    shards = []
    for j, (g, parts) in enumerate(zip(groups, counts)):
        shards.extend(_split(g, parts, stream(seed, f"partition/group{j}"), f"group {j}"))
    assert len(shards) == m
    return shards


def partition_degenerate(groups, m: int, seed: int) -> list:
    """For ``m < 10``: pool all groups and split evenly into ``m`` shards."""
    if m < 1:
        raise InputError("m must be >= 1", m=m)
    coords, y = _concat(groups)
    pooled = LabeledData(PointSet(coords, check_distinct=False), y)
    return _split(pooled, m, stream(seed, "partition/pooled"), "pooled data")


def partition(groups, m: int, seed: int) -> list:
    """Dispatch on ``m``: the ten-group scheme for ``m >= 10``, pooling below."""
    groups = list(groups)
    if m >= 10 and len(groups) == 10:
        return partition_paper_scheme(groups, m, seed)
    return partition_degenerate(groups, m, seed)
