"""Named random sub-streams derived from one integer seed."""
import zlib

import numpy as np

__all__ = ["stream"]


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``(seed, name)``; stable across runs and platforms."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])
