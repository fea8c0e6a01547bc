"""Monte Carlo harness: threshold-crossing DGPs and bias/RMSE aggregation.

Replications are independent: each one derives its own RNG stream from
the root seed through ``numpy.random.SeedSequence.spawn``, so aggregates
do not depend on execution order and a permutation of replication
indices leaves them unchanged.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigError, SsgdError
from .estimator import (SsgdConfig, normalize_scale, run_sgd_known_g,
                        run_ssgd_average, run_ssgd_group)
from .model import (Dataset, cauchy_link, logistic_link, normal_link,
                    validate_dataset)

__all__ = ["DgpSpec", "McReport", "generate", "run_monte_carlo", "worker_count"]

_ERROR_DISTS = ("normal", "cauchy", "logistic")


@dataclass(frozen=True)
class DgpSpec:
    """Simulation design: y = 1{X beta0 > eps} with i.i.d. rows."""

    beta0: np.ndarray
    error_dist: str = "normal"
    n: int = 5000
    seed: int = 0
    x_dist: str = "normal"       # independent standard normal columns

    def __post_init__(self):
        object.__setattr__(self, "beta0",
                           np.asarray(self.beta0, dtype=float).ravel())
        if not np.all(np.isfinite(self.beta0)):
            raise ConfigError("beta0 must be finite")
        if self.error_dist not in _ERROR_DISTS:
            raise ConfigError(f"unknown error_dist {self.error_dist!r}")
        if self.x_dist != "normal":
            raise ConfigError(f"unsupported x_dist {self.x_dist!r}")
        if self.n < self.beta0.shape[0] + 1:
            raise ConfigError(f"n = {self.n} too small for p = {self.beta0.shape[0]}")

    @property
    def p(self) -> int:
        return self.beta0.shape[0]

    def link(self):
        """The true error CDF, for the known-g estimator route."""
        return {"normal": normal_link, "cauchy": cauchy_link,
                "logistic": logistic_link}[self.error_dist]()


def _draw_errors(rng: np.random.Generator, dist: str, n: int) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(n)
    if dist == "cauchy":
        return rng.standard_cauchy(n)
    return rng.logistic(size=n)


def generate(spec: DgpSpec, seed: int | None = None) -> Dataset:
    """Draw one dataset from the DGP; reproducible from the seed."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    X = rng.standard_normal((spec.n, spec.p))
    eps = _draw_errors(rng, spec.error_dist, spec.n)
    y = (X @ spec.beta0 > eps).astype(np.int8)
    return validate_dataset(X, y)


@dataclass(frozen=True)
class McReport:
    """Per-coefficient bias/RMSE of normalized estimates plus timing."""

    truth_normalized: np.ndarray
    bias: np.ndarray
    rmse: np.ndarray
    replications: int
    n_failed: int
    failures: tuple[str, ...]
    mean_fit_seconds: float
    total_seconds: float
    estimator: str
    seed: int
    spec: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    estimates: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "estimator": self.estimator,
            "seed": self.seed,
            "replications": self.replications,
            "n_failed": self.n_failed,
            "failures": list(self.failures),
            "truth_normalized": self.truth_normalized.tolist(),
            "bias": self.bias.tolist(),
            "rmse": self.rmse.tolist(),
            "mean_fit_seconds": self.mean_fit_seconds,
            "total_seconds": self.total_seconds,
            "spec": self.spec,
            "config": self.config,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_csv(self) -> str:
        """Table shaped like the simulation tables: Beta, Bias, RMSE rows."""
        lines = ["Beta,Bias,RMSE"]
        for t, b, r in zip(self.truth_normalized, self.bias, self.rmse):
            lines.append(f"{t:g},{b:.6g},{r:.6g}")
        return "\n".join(lines) + "\n"


def worker_count() -> int:
    """Worker cap: SSGD_THREADS when set, otherwise the CPU count."""
    env = os.environ.get("SSGD_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"SSGD_THREADS = {env!r} is not an integer") from exc
        if cap < 1:
            raise ConfigError("SSGD_THREADS must be positive")
        return cap
    return os.cpu_count() or 1


def _one_replication(spec: DgpSpec, config: SsgdConfig, estimator: str,
                     data_seed: int, fit_seed: int):
    data = generate(spec, seed=data_seed)
    cfg = dataclasses.replace(config, seed=fit_seed)
    if estimator == "group":
        result = run_ssgd_group(data, cfg)
    elif estimator == "average":
        result = run_ssgd_average(data, cfg)
    elif estimator == "known-g":
        result = run_sgd_known_g(data, spec.link(), cfg,
                                 beta0=np.zeros(spec.p))
    else:
        raise ConfigError(f"unknown estimator {estimator!r}")
    center = result.beta_avg if estimator == "average" else result.beta_final
    return normalize_scale(center, cfg.numeraire), result.seconds


def run_monte_carlo(spec: DgpSpec, config: SsgdConfig, replications: int,
                    estimator: str = "group", n_jobs: int | None = None,
                    keep_estimates: bool = False) -> McReport:
    """Replicated estimation with independent seeded streams.

    Replications that raise are recorded as failures (with reason); a
    failure share above 5% fails the whole run.
    """
    if replications < 2:
        raise ConfigError("replications must be at least 2")
    t0 = time.perf_counter()
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(replications)
    jobs = []
    for child in children:
        data_seed, fit_seed = child.generate_state(2, dtype=np.uint64)
        jobs.append((int(data_seed), int(fit_seed)))

    n_jobs = n_jobs if n_jobs is not None else worker_count()

    def _safe(data_seed, fit_seed):
        try:
            est, secs = _one_replication(spec, config, estimator,
                                         data_seed, fit_seed)
            return ("ok", est, secs)
        except SsgdError as exc:
            return ("failed", f"{type(exc).__name__}: {exc}", 0.0)

    if n_jobs == 1:
        raw = [_safe(ds, fs) for ds, fs in jobs]
    else:
        raw = Parallel(n_jobs=n_jobs)(delayed(_safe)(ds, fs) for ds, fs in jobs)

    estimates, times, failures = [], [], []
    for status, payload, secs in raw:
        if status == "failed":
            failures.append(payload)
        else:
            estimates.append(payload)
            times.append(secs)
    if len(failures) > 0.05 * replications:
        raise SsgdError(
            f"{len(failures)}/{replications} replications failed; first: "
            f"{failures[0]}"
        )

    est = np.asarray(estimates)
    truth = normalize_scale(spec.beta0, config.numeraire)
    dev = est - truth
    bias = dev.mean(axis=0)
    rmse = np.sqrt((dev ** 2).mean(axis=0))
    return McReport(
        truth_normalized=truth,
        bias=bias,
        rmse=rmse,
        replications=replications,
        n_failed=len(failures),
        failures=tuple(failures),
        mean_fit_seconds=float(np.mean(times)),
        total_seconds=time.perf_counter() - t0,
        estimator=estimator,
        seed=spec.seed,
        spec={"beta0": spec.beta0.tolist(), "error_dist": spec.error_dist,
              "n": spec.n, "x_dist": spec.x_dist},
        config={"gamma1": config.gamma1, "gamma": config.gamma,
                "K": config.K, "q": config.q, "trim_t": config.trim_t,
                "refit_every": config.refit_every, "init": config.init,
                "standardize": config.standardize},
        estimates=est if keep_estimates else None,
    )
