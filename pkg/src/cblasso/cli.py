"""Command line interface: ``cblasso {solve,simulate,certify,ricecheck,compat}``.

Exit codes: 0 on success, 2 on invalid configuration or input, 3 when the
conic solver does not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import max_workers
from .certificates import build_derivative_interpolant, build_interpolant
from .experiments import (
    ExperimentConfig,
    compatibility_curve,
    run_experiment,
    write_compat_csv,
    write_records_csv,
    write_summary_json,
)
from .measures import FourierOperator, vector_from_json
from .noise import rice_check
from .solver import CBLassoConfig, NonConvergenceError, solve_pipeline
from .validation import check_observations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3

logger = logging.getLogger("cblasso")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one number")
    return vals


def _write_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _load_observations(path: str) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read observations from {path}: {exc}") from exc
    try:
        return check_observations(vector_from_json(data))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid observation file {path}: {exc}") from exc


def cmd_solve(args) -> int:
    y = _load_observations(args.input)
    op = FourierOperator.from_size(y.size)
    cfg = CBLassoConfig(
        lam=args.lam,
        lambda_frac=None if args.lam is not None else args.lambda_frac,
        compute_lambda_min=args.compute_lambda_min,
        strict=True,
    )
    res = solve_pipeline(op, y, cfg)
    _write_json(res.to_json(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig(
        n=args.n,
        s0=args.spikes,
        sigma0=args.sigma0,
        amplitudes=args.amplitudes,
        lambda_frac=args.lambda_frac,
        lam=args.lam,
        delta_min=args.delta_min,
        replicas=args.replicas,
        seed=args.seed,
        compute_lambda_min=args.compute_lambda_min,
    )
    records, summary = run_experiment(cfg)
    write_records_csv(records, args.out)
    if args.summary:
        write_summary_json(summary, args.summary)
    else:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_certify(args) -> int:
    op = FourierOperator(args.fc)
    nodes = np.asarray(args.nodes)
    delta = -1.0 if args.delta_min is None else args.delta_min
    if args.kind == "q0":
        targets = np.ones(nodes.size) if args.targets is None else np.asarray(args.targets)
        cert = build_derivative_interpolant(op, nodes, targets, power=args.power, delta_min=delta)
    elif args.kind == "q01":
        if not 0 <= args.index < nodes.size:
            raise ConfigError(f"--index must lie in [0, {nodes.size})")
        targets = np.zeros(nodes.size)
        targets[args.index] = 1.0
        cert = build_interpolant(op, nodes, targets, power=args.power, delta_min=delta)
    else:
        targets = np.ones(nodes.size) if args.targets is None else np.asarray(args.targets)
        if not np.allclose(np.abs(targets), 1.0):
            raise ConfigError("q1 targets must have unit modulus")
        cert = build_interpolant(op, nodes, targets, power=args.power, delta_min=delta)
    _write_json(cert.to_json(), args.out)
    return EXIT_OK


def cmd_ricecheck(args) -> int:
    n = FourierOperator(args.fc).n
    report = rice_check(
        n, args.u, samples=args.samples, seed=args.seed, sigma0=args.sigma0, paths=not args.no_paths
    )
    report.write_csv(args.out)
    logger.info("max normalized sup %.6f, violations %d", report.max_ratio, report.violations)
    return EXIT_OK


def cmd_compat(args) -> int:
    pts = compatibility_curve(FourierOperator(args.fc), args.eps)
    write_compat_csv(pts, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cblasso", description="Concomitant Beurling Lasso toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="estimate a spike train and the noise level from coefficients")
    s.add_argument("--input", required=True, help='JSON file {"fc": .., "entries": [[re, im], ..]}')
    s.add_argument("--lambda-frac", type=float, default=0.5)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--compute-lambda-min", action="store_true")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", help="paired replica study of both estimators")
    s.add_argument("--n", type=int, default=161)
    s.add_argument("--spikes", type=int, default=3)
    s.add_argument("--sigma0", type=float, default=1 / np.sqrt(2))
    s.add_argument("--amplitudes", default="pm1", choices=["pm1", "complex-unit"])
    s.add_argument("--lambda-frac", type=float, default=0.5)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--delta-min", type=float, default=None)
    s.add_argument("--replicas", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--compute-lambda-min", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--summary", default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("certify", help="build and verify an interpolating certificate")
    s.add_argument("--nodes", type=_floats, required=True)
    s.add_argument("--fc", type=int, required=True)
    s.add_argument("--kind", choices=["q1", "q01", "q0"], default="q1")
    s.add_argument("--targets", type=_floats, default=None, help="real targets; default all ones")
    s.add_argument("--index", type=int, default=0, help="node carrying the value 1 for q01")
    s.add_argument("--power", type=int, default=3)
    s.add_argument("--delta-min", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("ricecheck", help="Monte Carlo check of the noise tail bounds")
    s.add_argument("--fc", type=int, required=True)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--u", type=_floats, default=[0.3, 0.4, 0.5])
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--sigma0", type=float, default=1.0)
    s.add_argument("--no-paths", action="store_true", help="skip path simulation for crossings")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ricecheck)

    s = sub.add_parser("compat", help="dipole compatibility diagnostic")
    s.add_argument("--fc", type=int, required=True)
    s.add_argument("--eps", type=_floats, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compat)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        max_workers()
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
