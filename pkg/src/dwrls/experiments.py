"""Simulation harness: target functions, noisy rotated training groups,
distributed fits over a range of server counts, and RMSE tables.

All randomness comes from named sub-streams of one integer seed, so a
``(seed, config)`` pair fixes every output file.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .distributed import build_shards, dwrls_fit, partition, per_shard_config
from .errors import DwrlsError, InputError
from .geometry import (PointSet, equal_area_centers, fibonacci_points, load_points, rotate,
                       spiral_points)
from .harmonics import BandLimited, eval_bandlimited
from .kernels import (Kernel, gram_matrix, make_gaussian_chordal, make_sobolev, make_wendland,
                      wendland_profile)
from .quadrature import build_quadrature
from .rng import stream
from .solver import (FitConfig, LabeledData, degree_floor, power_grid, theoretical_lambda,
                     wrls_fit)

__all__ = [
    "TargetFunction",
    "NoiseModel",
    "ExperimentResult",
    "SweepSetup",
    "franke",
    "eval_target",
    "generate_training_data",
    "rmse",
    "default_setup",
    "run_sweep",
    "write_results",
    "native_band_target",
    "rate_check",
    "RateResult",
    "N_BASE",
    "N_TEST",
]

log = logging.getLogger(__name__)

N_BASE = 1038
N_TEST = 10000
N_ROTATIONS = 10


def franke(x) -> np.ndarray:
    """Three-dimensional Franke function (Renka's form) at points of S^2."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a, b, c = 9.0 * x[:, 0], 9.0 * x[:, 1], 9.0 * x[:, 2]
    return (0.75 * np.exp(-((a - 2) ** 2 + (b - 2) ** 2 + (c - 2) ** 2) / 4.0)
            + 0.75 * np.exp(-(a + 1) ** 2 / 49.0 - (b + 1) / 10.0 - (c + 1) / 10.0)
            + 0.5 * np.exp(-((a - 7) ** 2 + (b - 3) ** 2 + (c - 5) ** 2) / 4.0)
            - 0.2 * np.exp(-(a - 4) ** 2 - (b - 7) ** 2 - (c - 5) ** 2))


@dataclass(frozen=True)
class TargetFunction:
    """One of ``wendland_sum``, ``franke`` or ``bandlimited``."""

    tag: str
    centers: PointSet | None = None
    band: BandLimited | None = None

    def __post_init__(self):
        if self.tag == "wendland_sum" and self.centers is None:
            raise InputError("wendland_sum needs centers")
        if self.tag == "bandlimited" and self.band is None:
            raise InputError("bandlimited target needs a BandLimited function")
        if self.tag not in ("wendland_sum", "franke", "bandlimited"):
            raise InputError(f"unknown target {self.tag!r}")

    @classmethod
    def wendland_sum(cls, n_centers: int = 10) -> "TargetFunction":
        return cls("wendland_sum", centers=equal_area_centers(n_centers))

    @classmethod
    def franke(cls) -> "TargetFunction":
        return cls("franke")

    @classmethod
    def bandlimited(cls, band: BandLimited) -> "TargetFunction":
        return cls("bandlimited", band=band)

    def __call__(self, x):
        return eval_target(self, x)

    def describe(self) -> dict:
        out = {"tag": self.tag}
        if self.centers is not None:
            out["n_centers"] = len(self.centers)
        if self.band is not None:
            out["max_degree"] = self.band.max_degree
        return out


def eval_target(f: TargetFunction, x):
    """Target value at one point (float) or at many points (array)."""
    c = np.asarray(x.coords if hasattr(x, "coords") else x, dtype=np.float64)
    single = c.ndim == 1
    c = np.atleast_2d(c)
    if c.shape[1] != 3:
        raise InputError("targets are defined on S^2", d=c.shape[1] - 1)
    if f.tag == "franke":
        out = franke(c)
    elif f.tag == "wendland_sum":
        z = f.centers.coords
        chord = np.sqrt(np.clip(2.0 - 2.0 * (c @ z.T), 0.0, None))
        out = wendland_profile(chord).sum(axis=1)
    else:
        out = np.asarray(eval_bandlimited(f.band, c))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise: ``gaussian`` (std ``scale``), ``bounded_uniform`` on
    ``[-scale, scale]`` or ``none``."""

    kind: str = "gaussian"
    scale: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gaussian", "bounded_uniform", "none"):
            raise InputError(f"unknown noise kind {self.kind!r}")
        if self.kind != "none" and not self.scale > 0:
            raise InputError("noise scale must be positive", scale=self.scale)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, n)
        if self.kind == "bounded_uniform":
            return rng.uniform(-self.scale, self.scale, n)
        return np.zeros(n)

    def describe(self) -> dict:
        return {"kind": self.kind, "scale": None if self.kind == "none" else self.scale}


def generate_training_data(target: TargetFunction, base: PointSet, noise: NoiseModel,
                           seed: int, rotations: int = N_ROTATIONS) -> list:
    """Groups ``j = 1..rotations`` with inputs ``A_j base`` and noisy target values."""
    if base.d != 2:
        raise InputError("training base must lie on S^2", d=base.d)
    rng = stream(seed, "noise")
    groups = []
    for j in range(1, rotations + 1):
        pts = rotate(base, j)
        y = eval_target(target, pts.coords) + noise.sample(len(pts), rng)
        groups.append(LabeledData(pts, y))
    return groups


def rmse(est, test: LabeledData) -> float:
    """Root mean squared error of an estimator on labelled test data."""
    if len(test) == 0:
        raise InputError("test set is empty")
    pred = np.asarray(est.evaluate(test.inputs.coords))
    return float(np.sqrt(np.mean((pred - test.outputs) ** 2)))


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepSetup:
    """Everything a sweep needs besides the server counts and seeds."""

    target: TargetFunction
    kernel_grid: list
    lambda_grid: np.ndarray
    base: PointSet
    test: LabeledData
    noise: NoiseModel = field(default_factory=NoiseModel)
    base_source: str = "fibonacci"
    cv_cap: int = 2000

    def describe(self) -> dict:
        return {
            "target": self.target.describe(),
            "kernels": [k.tag for k in self.kernel_grid],
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "n_base": len(self.base),
            "base_source": self.base_source,
            "n_test": len(self.test),
            "noise": self.noise.describe(),
            "cv_cap": self.cv_cap,
            "weights": "equal",
            "parameter_rule": "5-fold cross-validated grid search per server, "
                              "lambda rescaled to N",
        }


def default_setup(target: str, design_file=None, n_base: int = N_BASE,
                  n_test: int = N_TEST) -> SweepSetup:
    """Kernel and lambda grids for the two standard targets.

    ``wendland``: Wendland kernel with ``lambda in {2^-q > 1e-10}``.
    ``franke``: chordal Gaussian with ten widths log-spaced in ``[0.1, 1]``
    and ``lambda in {3^-q > 1e-10}``.
    """
    if target == "wendland":
        f = TargetFunction.wendland_sum(10)
        kernels, lams = [make_wendland(2)], power_grid(2.0)
    elif target == "franke":
        f = TargetFunction.franke()
        kernels = [make_gaussian_chordal(float(s)) for s in np.logspace(-1.0, 0.0, 10)]
        lams = power_grid(3.0)
    else:
        raise InputError(f"unknown target {target!r}", choices=["wendland", "franke"])
    if design_file is not None:
        base, source = load_points(design_file), str(design_file)
    else:
        base, source = fibonacci_points(n_base), "fibonacci"
    tp = spiral_points(n_test)
    test = LabeledData(tp, eval_target(f, tp.coords))
    return SweepSetup(f, kernels, lams, base, test, base_source=source)


@dataclass
class ExperimentResult:
    config: dict
    cells: list  # dicts: m, seed, rmse, wall_ms, status
    residuals: dict = field(default_factory=dict)  # m -> (coords, true, pred)

    def summary(self) -> list:
        """Per ``m``: mean, min and max RMSE over successful seeds."""
        out = []
        for m in sorted({c["m"] for c in self.cells}):
            vals = [c["rmse"] for c in self.cells if c["m"] == m and c["status"] == "ok"]
            if vals:
                out.append({"m": m, "mean": float(np.mean(vals)), "min": min(vals),
                            "max": max(vals), "n_ok": len(vals)})
            else:
                out.append({"m": m, "mean": math.nan, "min": math.nan, "max": math.nan,
                            "n_ok": 0})
        return out


def _run_cell(setup: SweepSetup, m: int, seed: int, keep_residuals: bool):
    t0 = time.perf_counter()
    try:
        groups = generate_training_data(setup.target, setup.base, setup.noise, seed)
        datas = partition(groups, m, seed)
        configs = per_shard_config(datas, None, "cv", kernel_grid=setup.kernel_grid,
                                   lambda_grid=setup.lambda_grid, seed=seed,
                                   cv_cap=setup.cv_cap)
        est = dwrls_fit(build_shards(datas, configs), jobs=1)
        pred = np.asarray(est.evaluate(setup.test.inputs.coords))
        err = float(np.sqrt(np.mean((pred - setup.test.outputs) ** 2)))
        status = "ok"
    except DwrlsError as exc:
        log.error("cell m=%d seed=%d failed: %s", m, seed, exc)
        pred, err, status = None, math.nan, f"failed:{exc.code}"
    wall = int(round(1000 * (time.perf_counter() - t0)))
    log.info("m=%d seed=%d rmse=%.5f (%d ms)", m, seed, err, wall)
    cell = {"m": m, "seed": seed, "rmse": err, "wall_ms": wall, "status": status}
    return cell, (pred if keep_residuals else None)


def run_sweep(setup: SweepSetup, m_list, seeds, jobs: int = 1) -> ExperimentResult:
    """RMSE on the test set for every ``(m, seed)`` cell.

    Residual fields are kept for the first seed of every ``m``.
    """
    m_list = sorted(set(int(m) for m in m_list))
    seeds = [int(s) for s in seeds]
    if not m_list or not seeds:
        raise InputError("m_list and seeds must be nonempty")
    if m_list[0] < 1:
        raise InputError("server counts must be >= 1")
    jobs_list = [(m, s, s == seeds[0]) for m in m_list for s in seeds]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(lambda a: _run_cell(setup, *a), jobs_list))
    else:
        outs = [_run_cell(setup, *a) for a in jobs_list]
    cells, residuals = [], {}
    for (m, s, keep), (cell, pred) in zip(jobs_list, outs):
        cells.append(cell)
        if keep and pred is not None:
            residuals[m] = pred
    config = setup.describe()
    config.update({"m_list": m_list, "seeds": seeds, "version": __version__})
    return ExperimentResult(config, cells, residuals)


def write_results(result: ExperimentResult, setup: SweepSetup, out_dir,
                  timing: bool = True) -> list:
    """Write ``rmse.csv``, ``residuals_m{M}.csv`` and ``config.json``.

    With ``timing=False`` the ``wall_ms`` column is written as 0 so that
    reruns are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "rmse.csv"
    with p.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["m", "seed", "rmse", "wall_ms"])
        for c in sorted(result.cells, key=lambda c: (c["m"], c["seed"])):
            wr.writerow([c["m"], c["seed"], repr(c["rmse"]), c["wall_ms"] if timing else 0])
    written.append(p)
    x = setup.test.inputs.coords
    for m, pred in sorted(result.residuals.items()):
        p = out / f"residuals_m{m}.csv"
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["x", "y", "z", "true", "pred", "err"])
            for xi, t, q in zip(x, setup.test.outputs, pred):
                wr.writerow([repr(float(xi[0])), repr(float(xi[1])), repr(float(xi[2])),
                             repr(float(t)), repr(float(q)), repr(float(q - t))])
        written.append(p)
    p = out / "config.json"
    cfg = dict(result.config)
    cfg["summary"] = result.summary()
    cfg["failed_cells"] = [c for c in result.cells if c["status"] != "ok"]
    p.write_text(json.dumps(_nan_to_none(cfg), indent=2, sort_keys=True,
                            allow_nan=False) + "\n")
    written.append(p)
    return written


def _nan_to_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# convergence-rate check

def native_band_target(kernel: Kernel, degree: int, seed: int) -> BandLimited:
    """Random polynomial of the given degree with unit native-space norm.

    Degree-``k`` coefficients are Gaussian scaled by ``sqrt(phi_hat_k)``,
    so every degree carries comparable native-norm energy.
    """
    if kernel.d != 2:
        raise InputError("band targets are built on S^2", d=kernel.d)
    phi = kernel.coefficients(degree)
    rng = stream(seed, "band")
    v = np.zeros((degree + 1) ** 2)
    for k in range(degree + 1):
        v[k * k:(k + 1) ** 2] = rng.normal(size=2 * k + 1) * math.sqrt(phi[k])
    nat = math.sqrt(sum(float(np.sum(v[k * k:(k + 1) ** 2] ** 2)) / phi[k]
                        for k in range(degree + 1)))
    return BandLimited.from_vector(v / nat)


@dataclass(frozen=True)
class RateResult:
    ns: tuple
    rmse: np.ndarray  # (len(ns), n_seeds)
    slope: float

    @property
    def mean_rmse(self) -> np.ndarray:
        return self.rmse.mean(axis=1)


def rate_check(ns=(500, 1000, 2000, 4000), seeds=range(5), gamma: float = 2.0,
               sigma: float = 0.1, degree: int = 3, target_seed: int = 123,
               n_test: int = 2000) -> RateResult:
    """Log-log slope of RMSE against sample size under the theoretical schedule.

    For each ``n`` the nodes are ``fibonacci(n)`` with a positive rule of
    degree ``s = ceil(lam ** (-1/gamma))`` and ``lam = n ** (-2 gamma /
    (2 gamma + 2))``; the Sobolev kernel of index ``gamma`` fits a unit
    native-norm polynomial target plus Gaussian noise of std ``sigma``.
    The slope is the least-squares fit of ``log mean RMSE`` on ``log n``.
    """
    ns = tuple(int(n) for n in ns)
    seeds = [int(s) for s in seeds]
    if len(ns) < 2 or not seeds:
        raise InputError("need at least two sample sizes and one seed")
    kernel = make_sobolev(2, gamma)
    f = native_band_target(kernel, degree, target_seed)
    test = spiral_points(n_test).coords
    f_test = eval_bandlimited(f, test)
    out = np.empty((len(ns), len(seeds)))
    for i, n in enumerate(ns):
        pts = fibonacci_points(n)
        lam = theoretical_lambda(n, gamma, 2)
        s = degree_floor(lam, gamma)
        rule = build_quadrature(pts, s)
        Phi = gram_matrix(kernel, pts)
        fx = eval_bandlimited(f, pts.coords)
        cfg = FitConfig(lam, s, kernel)
        for j, seed in enumerate(seeds):
            y = fx + stream(seed, f"noise/{n}").normal(0.0, sigma, n)
            est = wrls_fit(LabeledData(pts, y), rule, cfg, gram=Phi)
            out[i, j] = math.sqrt(float(np.mean((est.evaluate(test) - f_test) ** 2)))
        log.info("rate check n=%d lam=%.3e s=%d rmse=%.5f", n, lam, s, out[i].mean())
    slope = float(np.polyfit(np.log(ns), np.log(out.mean(axis=1)), 1)[0])
    return RateResult(ns, out, slope)
