"""Compare the compiled core with the numpy fallback.

Usage: python benchmarks/bench_core.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from dwrls import _core_py
from dwrls.harmonics import _recurrence

try:
    from dwrls import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    t = np.cos(np.linspace(0.0, np.pi, 2**15 + 1))
    coeffs = 1.0 / (1.0 + np.arange(2001.0)) ** 4
    x = rng.normal(size=(4000, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    a, b = _recurrence(40)
    yield "clenshaw K=2000, 32769 points", "clenshaw_legendre", (coeffs, 2, t)
    yield "harmonics s=40, 4000 points", "real_sph_harm", (np.ascontiguousarray(x), 40, a, b)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"{'case':34s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for label, name, fargs in cases():
        py = min(timeit.repeat(lambda: getattr(_core_py, name)(*fargs), number=1,
                               repeat=args.repeat))
        if _core is None:
            print(f"{label:34s} {py:11.4f} {'n/a':>13s} {'n/a':>8s}")
            continue
        fast = np.asarray(getattr(_core, name)(*fargs))
        diff = np.max(np.abs(fast - getattr(_core_py, name)(*fargs)))
        co = min(timeit.repeat(lambda: getattr(_core, name)(*fargs), number=1,
                               repeat=args.repeat))
        print(f"{label:34s} {py:11.4f} {co:13.4f} {py / co:7.1f}x   max diff {diff:.1e}")


if __name__ == "__main__":
    main()
