"""Compute an antipodally symmetric spherical t-design by nonlinear least squares.

For a symmetric set {x_i, -x_i} every odd-degree moment vanishes, so the
unknowns are the angles of one point per pair and the equations are the
even-degree moments ``sum_i Y_{k,l}(x_i) = 0`` for ``2 <= k <= t``.

Usage::

    python tools/make_design.py --t 45 --n 1038 --out tests/data/sym045_1038.csv
"""
import argparse
import sys
import time

import numpy as np

from dwrls.geometry import PointSet, save_points, spiral_points
from dwrls.harmonics import sph_harmonics_matrix


def _xyz(ang):
    th, ph = ang[0::2], ang[1::2]
    st = np.sin(th)
    return np.column_stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)])


def _even_columns(t):
    cols = []
    for k in range(2, t + 1, 2):
        cols.extend(range(k * k, (k + 1) * (k + 1)))
    return np.array(cols)


def residual(ang, t, cols):
    Y = sph_harmonics_matrix(_xyz(ang), t)[:, cols]
    return Y.sum(axis=0)


def jacobian(ang, t, cols, h=1e-7):
    p = ang.size // 2
    J = np.empty((cols.size, ang.size))
    for off in (0, 1):
        up, dn = ang.copy(), ang.copy()
        up[off::2] += h
        dn[off::2] -= h
        # each point's harmonics depend only on its own two angles
        J[:, off::2] = ((sph_harmonics_matrix(_xyz(up), t)[:, cols]
                         - sph_harmonics_matrix(_xyz(dn), t)[:, cols]) / (2 * h)).T
    assert J.shape[1] == 2 * p
    return J


def solve(ang, t, cols, max_iter=200, tol=1e-14, log=None):
    """Levenberg-Marquardt with minimum-norm steps for an underdetermined system."""
    r = residual(ang, t, cols)
    mu = 1e-3 * float(r @ r)
    for it in range(max_iter):
        J = jacobian(ang, t, cols)
        JJ = J @ J.T
        while True:
            step = -J.T @ np.linalg.solve(JJ + mu * np.eye(JJ.shape[0]), r)
            trial = ang + step
            rt = residual(trial, t, cols)
            if rt @ rt < r @ r:
                ang, r = trial, rt
                mu = max(mu / 10.0, 1e-15)
                break
            mu *= 10.0
            if mu > 1e12:
                return ang, r, it
        if log:
            log(f"iter {it:3d} max_defect {np.abs(r).max():.3e} mu {mu:.1e}")
        if np.abs(r).max() < tol:
            break
    return ang, r, it


def start_angles(pairs):
    # upper half of a generalized spiral; a Fibonacci start stalls at t=45
    x = spiral_points(2 * pairs).coords
    x = x[np.argsort(-x[:, 2], kind="stable")][:pairs]
    th = np.arccos(np.clip(x[:, 2], -1, 1))
    ph = np.arctan2(x[:, 1], x[:, 0])
    out = np.empty(2 * pairs)
    out[0::2], out[1::2] = th, ph
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=int, default=45)
    ap.add_argument("--n", type=int, default=1038)
    ap.add_argument("--out", required=True)
    ap.add_argument("--max-iter", type=int, default=200)
    args = ap.parse_args(argv)
    if args.n % 2:
        raise SystemExit("n must be even for a symmetric design")
    cols = _even_columns(args.t)
    ang = start_angles(args.n // 2)
    t0 = time.time()
    ang, res, iters = solve(ang, args.t, cols, args.max_iter,
                            log=lambda msg: print(msg, file=sys.stderr))
    half = _xyz(ang)
    pts = np.vstack([half, -half])
    r = np.abs(res).max()
    print(f"equations={cols.size} unknowns={ang.size} max_defect={r:.3e} "
          f"iterations={iters + 1} {time.time() - t0:.1f}s", file=sys.stderr)
    save_points(PointSet(pts), args.out)
    return 0 if r < 1e-12 else 1


if __name__ == "__main__":
    sys.exit(main())
