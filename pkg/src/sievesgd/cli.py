"""Command-line front end: ``sievesgd fit | simulate | tune``.

Exit codes: 0 success, 2 input parse error (with line number), 3
validation/configuration error, 4 numeric failure mid-fit.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, NonInvertibleError, NumericError, SsgdError,
                     ValidationError)
from .estimator import (SsgdConfig, default_tuning, run_sgd_known_g,
                        run_ssgd_average)
from .inference import (confidence_intervals, normalized_confidence_intervals,
                        sandwich_vcov)
from .model import cauchy_link, logistic_link, normal_link, validate_dataset
from .simulate import DgpSpec, run_monte_carlo, worker_count

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4

_NUMBER = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")

PAPER_BETA0 = [1.0, 1.0, 2.0, 4.0, 5.0, -1.0, -2.0, -4.0, -5.0]

_LINKS = {"logistic": logistic_link, "normal": normal_link,
          "cauchy": cauchy_link}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def read_csv(path: str):
    """Strict CSV reader: header row, one `y` column, numeric regressors.

    Numbers must match ``-?d+(.d+)?([eE][+-]?d+)?``; anything else is a
    parse error naming the line.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_PARSE) from exc
    lines = text.splitlines()
    if not lines:
        raise CliError(f"{path}: empty file", EXIT_PARSE)
    header = [h.strip() for h in lines[0].split(",")]
    if "y" not in header:
        raise CliError(f"{path}: header must contain a `y` column", EXIT_PARSE)
    y_col = header.index("y")
    ncol = len(header)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != ncol:
            raise CliError(
                f"{path}:{lineno}: expected {ncol} fields, got {len(cells)}",
                EXIT_PARSE,
            )
        for cell in cells:
            if not _NUMBER.match(cell):
                raise CliError(
                    f"{path}:{lineno}: {cell!r} is not a valid number",
                    EXIT_PARSE,
                )
        rows.append((lineno, [float(c) for c in cells]))
    if not rows:
        raise CliError(f"{path}: no data rows", EXIT_PARSE)
    values = np.asarray([r[1] for r in rows])
    linenos = [r[0] for r in rows]
    y = values[:, y_col]
    X = np.delete(values, y_col, axis=1)
    names = [h for i, h in enumerate(header) if i != y_col]
    return X, y, names, linenos


def _config_from_args(args) -> SsgdConfig:
    return SsgdConfig(
        gamma1=args.gamma1,
        gamma=args.gamma,
        K=args.iterations,
        q=args.sieve_powers,
        trim_t=args.trim,
        seed=args.seed,
        refit_every=args.refit_every,
        numeraire=args.normalize_index,
    )


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def cmd_fit(args) -> int:
    X, y, names, linenos = read_csv(args.input)
    try:
        data = validate_dataset(X, y)
    except ValidationError as exc:
        parts = []
        for v in exc.violations:
            if v.code == "non_binary_outcome" and v.index is not None:
                parts.append(f"line {linenos[v.index]}: {v}")
            else:
                parts.append(str(v))
        raise CliError("invalid dataset: " + "; ".join(parts), EXIT_VALIDATION)

    config = _config_from_args(args)
    try:
        if args.known_g:
            result = run_sgd_known_g(data, _LINKS[args.link](), config)
        else:
            result = run_ssgd_average(data, config)
    except (ConfigError, ValidationError) as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    except (NumericError, SsgdError) as exc:
        raise CliError(str(exc), EXIT_NUMERIC)

    artifact = {
        "schema": 1,
        "estimator": result.estimator,
        "seed": args.seed,
        "regressors": names,
        "beta_final": result.beta_final.tolist(),
        "beta_avg": result.beta_avg.tolist(),
        "beta_normalized": result.beta_normalized.tolist(),
        "numeraire": args.normalize_index,
        "pi": (result.sieve_fit.pi.tolist()
               if result.sieve_fit is not None else None),
        "iterations": int(result.path.grad_norms.shape[0]),
        "final_gradient_norm": (float(result.path.grad_norms[-1])
                                if result.path.grad_norms.size else None),
        "seconds": result.seconds,
        "warnings": list(result.warnings),
        "vcov": None,
        "ci_raw": None,
        "ci_normalized": None,
        "ci_level": args.level,
    }
    if result.sieve_fit is not None:
        try:
            vc = sandwich_vcov(data, result, include_f=args.include_f)
            artifact["vcov"] = vc.vcov.tolist()
            artifact["ci_raw"] = confidence_intervals(
                result, vc, args.level).tolist()
            artifact["ci_normalized"] = normalized_confidence_intervals(
                result, vc, args.level, args.normalize_index).tolist()
        except (NonInvertibleError, ConfigError) as exc:
            artifact["warnings"].append(f"inference skipped: {exc}")

    payload = json.dumps(artifact, indent=2, default=_jsonify)
    _write(args.output, payload)
    return 0


def cmd_simulate(args) -> int:
    if args.preset == "paper-normal":
        beta0, error = PAPER_BETA0, "normal"
        sieve_powers = args.sieve_powers or 3
    elif args.preset == "paper-cauchy":
        beta0, error = PAPER_BETA0, "cauchy"
        sieve_powers = args.sieve_powers or 3
    else:
        if args.beta0 is None:
            raise CliError("simulate needs --preset or --beta0",
                           EXIT_VALIDATION)
        beta0 = [float(b) for b in args.beta0.split(",")]
        error = args.error
        sieve_powers = args.sieve_powers

    try:
        spec = DgpSpec(beta0=beta0, error_dist=error, n=args.n, seed=args.seed)
        config = _config_from_args(args)
        config.q = sieve_powers
        report = run_monte_carlo(spec, config, args.reps,
                                 estimator=args.estimator,
                                 n_jobs=worker_count())
    except (ConfigError, ValidationError) as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    except SsgdError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)

    if args.output:
        base = Path(args.output)
        if base.suffix in (".json", ".csv"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".json").write_text(report.to_json() + "\n")
        base.with_suffix(".csv").write_text(report.to_csv())
    else:
        sys.stdout.write(report.to_csv() if args.format == "csv"
                         else report.to_json() + "\n")
    return 0


def cmd_tune(args) -> int:
    try:
        if not 0.5 < args.gamma <= 1.0:
            raise ConfigError(f"gamma = {args.gamma} must lie in (0.5, 1]")
        rule = default_tuning(args.n, args.p, args.gamma)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)
    lo, hi = rule.k_window
    print(f"n = {args.n}, p = {args.p}, gamma = {args.gamma}")
    print(f"K = {rule.K} (admissible window [{lo}, {hi}])")
    print(f"sieve powers q = {rule.q}")
    if rule.dimension_warning:
        print("warning: p * K^(-gamma) > 0.5; dimension is large for this K")
    return 0


def _write(output: str | None, payload: str):
    if output and output != "-":
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(payload + "\n")
    else:
        sys.stdout.write(payload + "\n")


def _add_config_flags(sub):
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--gamma1", type=float, default=2.0)
    sub.add_argument("--gamma", type=float, default=0.8)
    sub.add_argument("--iterations", type=int, default=None,
                     help="iteration count K (default: tuning rule, K = n)")
    sub.add_argument("--sieve-powers", type=int, default=None,
                     help="number of polynomial powers in the sieve")
    sub.add_argument("--trim", type=int, default=0,
                     help="averaging trim t: average iterates 1..K-t")
    sub.add_argument("--refit-every", type=int, default=1,
                     help="refit the sieve every m iterations")
    sub.add_argument("--normalize-index", type=int, default=0,
                     help="numeraire coefficient index (0-based)")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--output", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sievesgd",
        description="Iterative convex-optimization estimators for "
                    "semiparametric binary-choice models",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sp = ap.add_subparsers(dest="command", required=True)

    fit = sp.add_parser("fit", help="estimate from a CSV file")
    fit.add_argument("--input", required=True,
                     help="CSV with a `y` column of {0,1} outcomes")
    _add_config_flags(fit)
    fit.add_argument("--known-g", action="store_true",
                     help="use the known-link SGD route")
    fit.add_argument("--link", choices=sorted(_LINKS), default="logistic")
    fit.add_argument("--include-f", action=argparse.BooleanOptionalAction,
                     default=True,
                     help="include the estimated-link correction in sigma2")
    fit.add_argument("--level", type=float, default=0.95)
    fit.set_defaults(func=cmd_fit)

    sim = sp.add_parser("simulate", help="Monte Carlo bias/RMSE tables")
    _add_config_flags(sim)
    sim.add_argument("--preset", choices=("paper-normal", "paper-cauchy"))
    sim.add_argument("--beta0", help="comma-separated true coefficients")
    sim.add_argument("--error", choices=("normal", "cauchy", "logistic"),
                     default="normal")
    sim.add_argument("--n", type=int, default=5000)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--estimator", choices=("group", "average", "known-g"),
                     default="group")
    sim.set_defaults(func=cmd_simulate)

    tune = sp.add_parser("tune", help="report the tuning-rule defaults")
    tune.add_argument("--n", type=int, required=True)
    tune.add_argument("--p", type=int, default=1)
    tune.add_argument("--gamma", type=float, default=0.8)
    tune.set_defaults(func=cmd_tune)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
