"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure. Errors
are printed to stderr as JSON ``{code, module, message, context}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DwrlsError, InputError, NumericalError

log = logging.getLogger("dwrls")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of flag defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=_positive_int, default=None,
                        help="concurrent tasks (default: available cores)")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--dry-run", action="store_true",
                        help="print the resolved plan and exit")

    p = _Parser(prog="dwrls", description="Regularized least squares on the sphere.")
    p.add_argument("--version", action="version", version=f"dwrls {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-points", parents=[common], help="write a point set")
    g.add_argument("--kind", required=True,
                   choices=["fibonacci", "spiral", "equal_area_centers"])
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--target", choices=["franke", "wendland"],
                   help="also write target values as a y column")
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--out", type=Path, required=True)

    q = sub.add_parser("quadrature", parents=[common], help="build or verify a rule")
    qsub = q.add_subparsers(dest="action", required=True, parser_class=_Parser)
    qb = qsub.add_parser("build", parents=[common])
    qb.add_argument("--points", type=Path, required=True)
    qb.add_argument("--degree", type=int, default=None)
    qb.add_argument("--method", choices=["ldp", "nnls"], default="ldp")
    qb.add_argument("--out", type=Path, required=True)
    qv = qsub.add_parser("verify", parents=[common])
    qv.add_argument("--rule", type=Path, required=True)
    qv.add_argument("--degree", type=int, required=True)

    f = sub.add_parser("fit", parents=[common], help="single-server fit")
    f.add_argument("--data", type=Path, required=True, help="CSV x0,x1,x2,y")
    f.add_argument("--rule", required=True,
                   help="rule CSV on the same nodes, or 'equal' for equal weights")
    f.add_argument("--lambda", dest="lam", type=float, required=True)
    f.add_argument("--kernel", type=Path, required=True, help="kernel spec JSON")
    f.add_argument("--out", type=Path, required=True)

    d = sub.add_parser("dfit", parents=[common], help="distributed fit")
    d.add_argument("--groups", type=Path, nargs="+", required=True)
    d.add_argument("--servers", type=_positive_int, required=True)
    d.add_argument("--gamma", type=float, default=None)
    d.add_argument("--mode", choices=["theoretical", "cv"], default="theoretical")
    d.add_argument("--kernel", type=Path, required=True, help="kernel spec JSON")
    d.add_argument("--lambda-base", type=float, default=3.0,
                   help="cv mode grid is base**-q above 1e-10")
    d.add_argument("--weights", choices=["equal", "quadrature"], default="equal")
    d.add_argument("--allow-partial", action="store_true")
    d.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("simulate", parents=[common], help="server-count sweep")
    s.add_argument("--target", choices=["wendland", "franke"], required=True)
    s.add_argument("--design-file", type=Path, default=None)
    s.add_argument("--m", type=_int_list, default=[1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100])
    s.add_argument("--seeds", type=_positive_int, default=5)
    s.add_argument("--n-base", type=_positive_int, default=1038)
    s.add_argument("--n-test", type=_positive_int, default=10000)
    s.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 for byte-identical reruns")
    s.add_argument("--out", type=Path, required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate an estimator")
    e.add_argument("--estimator", type=Path, required=True)
    e.add_argument("--points", type=Path, required=True,
                   help="CSV x0,x1,x2 or x0,x1,x2,y (then RMSE is reported)")
    e.add_argument("--out", type=Path, default=None)
    return p


def _subparser_for(parser, argv):
    """The innermost subparser selected by ``argv``."""
    node = parser
    while True:
        acts = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not acts:
            return node
        chosen = next((t for t in argv if t in acts[0].choices), None)
        if chosen is None:
            return node
        node = acts[0].choices[chosen]


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        _apply_config(_subparser_for(parser, argv), known.config)
    return parser.parse_args(argv)


def _apply_config(leaf, path):
    """Config values become parser defaults, so explicit flags win."""
    try:
        conf = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    dests = {a.dest: a for a in leaf._actions}
    unknown = sorted(k for k in conf if k.replace("-", "_") not in dests)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    defaults = {}
    for key, val in conf.items():
        act = dests[key.replace("-", "_")]
        try:
            if act.type is not None and not isinstance(val, bool):
                if isinstance(val, list) and act.nargs in ("+", "*"):
                    val = [act.type(str(v)) for v in val]
                elif isinstance(val, list):
                    val = act.type(",".join(str(v) for v in val))
                else:
                    val = act.type(str(val))
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad config value for {key}: {exc}") from None
        if act.choices is not None and val not in act.choices:
            raise UsageError(f"bad config value for {key}: {val!r}")
        defaults[act.dest] = val
        act.required = False
    leaf.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# commands

def _load_kernel(path):
    from .kernels import kernel_from_spec

    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read kernel spec {path}: {exc}") from None
    return kernel_from_spec(spec)


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n")


def cmd_gen_points(args):
    from .experiments import TargetFunction, eval_target
    from .geometry import generate_points, save_points
    from .rng import stream
    from .solver import LabeledData, save_labeled

    pts = generate_points(args.kind, args.n)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.target is None:
        save_points(pts, args.out)
        return
    f = TargetFunction.franke() if args.target == "franke" else TargetFunction.wendland_sum()
    y = eval_target(f, pts.coords)
    if args.noise_sigma > 0:
        y = y + stream(args.seed, "noise").normal(0.0, args.noise_sigma, len(pts))
    save_labeled(LabeledData(pts, y), args.out)


def cmd_quadrature(args):
    from .geometry import load_points
    from .quadrature import build_quadrature, load_rule, save_rule, verify_exactness

    if args.action == "build":
        rule = build_quadrature(load_points(args.points), args.degree, method=args.method)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        save_rule(rule, args.out)
        print(json.dumps({"degree": rule.degree, "residual": rule.residual,
                          "c1_observed": rule.c1_observed}))
    else:
        rule = load_rule(args.rule)
        defect = verify_exactness(rule, args.degree)
        print(json.dumps({"degree": args.degree, "defect": defect,
                          "exact": defect < 1e-8}))


def cmd_fit(args):
    from .quadrature import QuadratureRule, load_rule
    from .solver import FitConfig, load_labeled, wrls_fit

    data = load_labeled(args.data)
    kernel = _load_kernel(args.kernel)
    if args.rule == "equal":
        rule = QuadratureRule.equal_weights(data.inputs)
    else:
        rule = load_rule(args.rule)
    est = wrls_fit(data, rule, FitConfig(args.lam, rule.degree, kernel))
    _write_json(args.out, est.to_dict())


def cmd_dfit(args):
    from .distributed import build_shards, dwrls_fit, partition, per_shard_config
    from .solver import load_labeled, power_grid

    groups = [load_labeled(p) for p in args.groups]
    datas = partition(groups, args.servers, args.seed)
    kernel = _load_kernel(args.kernel)
    if args.mode == "theoretical":
        configs = per_shard_config(datas, args.gamma, "theoretical", kernel=kernel)
    else:
        if not args.lambda_base > 1:
            raise InputError("--lambda-base must exceed 1")
        configs = per_shard_config(datas, args.gamma, "cv", kernel_grid=[kernel],
                                   lambda_grid=power_grid(args.lambda_base), seed=args.seed)
    est = dwrls_fit(build_shards(datas, configs, args.weights), jobs=args.jobs,
                    allow_partial=args.allow_partial)
    _write_json(args.out, est.to_dict())


def cmd_simulate(args):
    from .experiments import default_setup, run_sweep, write_results

    setup = default_setup(args.target, args.design_file, args.n_base, args.n_test)
    seeds = list(range(args.seed, args.seed + args.seeds))
    res = run_sweep(setup, args.m, seeds, jobs=args.jobs or 1)
    write_results(res, setup, args.out, timing=not args.no_timing)
    for row in res.summary():
        print(f"m={row['m']:4d}  rmse mean={row['mean']:.5f} "
              f"[{row['min']:.5f}, {row['max']:.5f}]")
    if any(c["status"] != "ok" for c in res.cells):
        raise NumericalError("some sweep cells failed", failed=[
            (c["m"], c["seed"]) for c in res.cells if c["status"] != "ok"])


def cmd_eval(args):
    import csv

    from .distributed import GlobalEstimator
    from .geometry import PointSet
    from .solver import LocalEstimator

    try:
        obj = json.loads(args.estimator.read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read estimator {args.estimator}: {exc}") from None
    est = GlobalEstimator.from_dict(obj) if "components" in obj else LocalEstimator.from_dict(obj)
    with args.points.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise InputError(f"points file {args.points} has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        arr = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError:
        raise InputError("non-numeric value in points file") from None
    has_y = header[-1] == "y"
    x = arr[:, :-1] if has_y else arr
    pred = np.asarray(est.evaluate(PointSet(x, check_distinct=False).coords))
    out = {"n": int(pred.size)}
    if has_y:
        out["rmse"] = float(np.sqrt(np.mean((pred - arr[:, -1]) ** 2)))
    if args.out is not None:
        with args.out.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header[:x.shape[1]] + ["pred"])
            for xi, v in zip(x, pred):
                wr.writerow([repr(float(c)) for c in xi] + [repr(float(v))])
    print(json.dumps(out))


COMMANDS = {
    "gen-points": cmd_gen_points,
    "quadrature": cmd_quadrature,
    "fit": cmd_fit,
    "dfit": cmd_dfit,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
}


def _plan(args) -> dict:
    plan = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Path) else x for x in v]
        plan[k] = v
    return plan


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _report(exc: DwrlsError):
    print(json.dumps(_json_safe(exc.to_dict()), sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.dry_run:
        print(json.dumps({"plan": _plan(args)}, indent=2, sort_keys=True))
        return EXIT_OK
    if args.jobs is None:
        args.jobs = os.cpu_count() or 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args)
    except InputError as exc:
        _report(exc)
        return EXIT_USAGE
    except NumericalError as exc:
        _report(exc)
        return EXIT_NUMERICAL
    except DwrlsError as exc:
        _report(exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(json.dumps({"code": "io_error", "module": "cli", "message": str(exc),
                          "context": {}}), file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
