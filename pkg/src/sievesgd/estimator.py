"""The three iterative estimators: known-g SGD, sieve SGD, and averaging.

All three share the decaying learning-rate schedule gamma1 * k^(-gamma)
and a fixed positive-definite conditioning matrix C (rescaled internally
to unit spectral norm). The sieve SGD loop alternates a full-sample
gradient step on the coefficient vector with a series-logit refit of the
error CDF on the updated index.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import ConfigError, NormalizationError, NumericError
from .model import Dataset, LinkFunction
from .sieve import (SieveFit, build_basis, fit_series_logit, plain_logit,
                    sieve_cdf)

__all__ = [
    "SsgdConfig",
    "IteratePath",
    "FitResult",
    "TuningRule",
    "learning_rate",
    "run_sgd_known_g",
    "group_update",
    "run_ssgd_group",
    "run_ssgd_average",
    "default_tuning",
    "normalize_scale",
]


@dataclass
class SsgdConfig:
    """Estimation settings; ``K`` and ``q`` default to the tuning rule.

    ``standardize`` runs the sieve SGD loop on unit-variance rescaled
    regressor columns (coefficients are mapped back afterwards), which
    makes the normalized estimates exactly invariant to rescaling X.
    """

    gamma1: float = 2.0
    gamma: float = 0.8
    C: np.ndarray | None = None
    K: int | None = None
    q: int | None = None
    trim_t: int = 0
    seed: int = 0
    refit_every: int = 1
    init: str = "logit"          # "logit" warm start or "zero"
    standardize: bool = True
    early_stop_tol: float | None = None
    numeraire: int = 0


@dataclass(frozen=True)
class IteratePath:
    """Stored iterate history: betas[k] is the k-th iterate (betas[0] = start)."""

    betas: np.ndarray            # (K+1, p)
    grad_norms: np.ndarray       # (K,)

    def average(self, trim_t: int = 0) -> np.ndarray:
        """Arithmetic mean of iterates 1..K-trim_t."""
        K = self.betas.shape[0] - 1
        if not 0 <= trim_t < K:
            raise ConfigError(f"trim_t = {trim_t} must be in [0, K = {K})")
        return self.betas[1:K - trim_t + 1].mean(axis=0)


@dataclass(frozen=True)
class FitResult:
    """Output of one estimation run."""

    estimator: str
    beta_final: np.ndarray
    beta_avg: np.ndarray
    beta_normalized: np.ndarray
    sieve_fit: SieveFit | None
    path: IteratePath
    seconds: float
    seed: int
    warnings: tuple[str, ...] = ()
    vcov: np.ndarray | None = None


@dataclass(frozen=True)
class TuningRule:
    """Iteration count / sieve order defaults plus the admissible K window."""

    K: int
    q: int
    k_window: tuple[int, int]
    dimension_warning: bool


def learning_rate(k: int, config) -> float:
    """Decaying step size gamma1 * k^(-gamma)."""
    if k < 1:
        raise ValueError("iteration index k must be >= 1")
    return config.gamma1 * float(k) ** (-config.gamma)


def default_tuning(n: int, p: int, gamma: float) -> TuningRule:
    """Inference-ready defaults: K = n and a slowly growing sieve order.

    The admissible window for K is [ceil(n^(1/(2 gamma))), floor(n^(1/gamma))];
    a dimension warning fires when p * K^(-gamma) > 0.5.
    """
    if n < 10:
        raise ConfigError(f"n = {n} too small for the tuning rule")
    K = n
    q = min(8, max(3, int(math.floor(n ** 0.2))))
    lo = int(math.ceil(n ** (1.0 / (2.0 * gamma))))
    hi = int(math.floor(n ** (1.0 / gamma)))
    return TuningRule(K=K, q=q, k_window=(lo, hi),
                      dimension_warning=p * K ** (-gamma) > 0.5)


def _check_C(C, p: int) -> np.ndarray:
    if C is None:
        return np.eye(p)
    C = np.asarray(C, dtype=float)
    if C.shape != (p, p):
        raise ConfigError(f"C has shape {C.shape}, expected ({p}, {p})")
    if not np.allclose(C, C.T, atol=1e-10):
        raise ConfigError("C must be symmetric")
    eigs = np.linalg.eigvalsh(C)
    if eigs.min() <= 0:
        raise ConfigError("C must be positive definite")
    return C


def _resolve_C(C, p: int) -> np.ndarray:
    """Validate C and rescale it to unit spectral norm (used by full runs;
    the bare one-step update keeps C as given so it stays linear in C)."""
    C = _check_C(C, p)
    return C / np.linalg.eigvalsh(C).max()


def _validate_config(config: SsgdConfig, n: int, p: int,
                     averaging: bool) -> SsgdConfig:
    if config.gamma1 <= 1.0:
        raise ConfigError(f"gamma1 = {config.gamma1} must exceed 1")
    if not 0.5 < config.gamma <= 1.0:
        raise ConfigError(f"gamma = {config.gamma} must lie in (0.5, 1]")
    if averaging and config.gamma == 1.0:
        raise ConfigError("averaging requires gamma strictly below 1")
    if n >= 10:
        rule = default_tuning(n, p, config.gamma)
        K = config.K if config.K is not None else rule.K
        q = config.q if config.q is not None else rule.q
        if (config.K is not None
                and not rule.k_window[0] <= K <= rule.k_window[1]):
            warnings.warn(
                f"K = {K} outside the admissible window {rule.k_window}",
                stacklevel=3,
            )
    else:
        # below the tuning rule's reach; K must be given explicitly
        if config.K is None:
            raise ConfigError(f"n = {n} too small for the tuning rule; "
                              "set K explicitly")
        K = config.K
        q = config.q if config.q is not None else 3
    if K < 1:
        raise ConfigError(f"K = {K} must be positive")
    if not 0 <= config.trim_t < K:
        raise ConfigError(f"trim_t = {config.trim_t} must be in [0, K = {K})")
    if config.refit_every < 1:
        raise ConfigError("refit_every must be >= 1")
    if config.init not in ("logit", "zero"):
        raise ConfigError(f"unknown init {config.init!r}")
    return replace(config, K=K, q=q)


def normalize_scale(beta, numeraire: int = 0) -> np.ndarray:
    """Coefficients relative to the numeraire, which is dropped.

    The index model identifies beta only up to positive scale, so
    reports are in ratio form.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    if abs(beta[numeraire]) <= 1e-10:
        raise NormalizationError(
            f"coefficient {numeraire} is numerically zero; choose a "
            "different numeraire index"
        )
    return np.delete(beta, numeraire) / beta[numeraire]


def run_sgd_known_g(data: Dataset, link: LinkFunction, config: SsgdConfig,
                    beta0=None) -> FitResult:
    """Per-observation SGD with a known error CDF.

    Consumes one observation per iteration in a seeded-shuffle order;
    requires K <= n.
    """
    t0 = time.perf_counter()
    n, p = data.n, data.p
    cfg = _validate_config(config, n, p, averaging=False)
    if cfg.K > n:
        raise ConfigError(f"K = {cfg.K} exceeds n = {n}; the SGD estimator "
                          "consumes one observation per iteration")
    C = _resolve_C(cfg.C, p)
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, float).copy()

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    X, y = data.X, data.y
    betas = np.empty((cfg.K + 1, p))
    betas[0] = beta
    grad_norms = np.empty(cfg.K)
    for k in range(1, cfg.K + 1):
        i = order[k - 1]
        x = X[i]
        u = float(x @ beta)
        if not np.isfinite(u):
            raise NumericError(f"non-finite index at iteration {k} (row {i})")
        grad = (float(link.g(u)) - float(y[i])) * x
        beta = beta - learning_rate(k, cfg) * (C @ grad)
        betas[k] = beta
        grad_norms[k - 1] = float(np.linalg.norm(grad))

    path = IteratePath(betas=betas, grad_norms=grad_norms)
    beta_avg = path.average(cfg.trim_t)
    return FitResult(
        estimator="known-g",
        beta_final=beta,
        beta_avg=beta_avg,
        beta_normalized=normalize_scale(beta, cfg.numeraire),
        sieve_fit=None,
        path=path,
        seconds=time.perf_counter() - t0,
        seed=cfg.seed,
    )


def group_update(beta_prev, data: Dataset, cdf_prev, k: int,
                 config: SsgdConfig) -> np.ndarray:
    """One full-sample gradient step using the previous fitted CDF."""
    beta_prev = np.asarray(beta_prev, dtype=float).ravel()
    C = _check_C(config.C, data.p)
    z = data.X @ beta_prev
    probs = np.asarray(cdf_prev(z), dtype=float)
    grad = data.X.T @ (probs - data.y) / data.n
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite mean gradient at iteration {k}")
    return beta_prev - learning_rate(k, config) * (C @ grad)


def _run_ssgd(data: Dataset, config: SsgdConfig, beta0, average: bool,
              estimator: str) -> FitResult:
    t0 = time.perf_counter()
    n, p = data.n, data.p
    cfg = _validate_config(config, n, p, averaging=average)
    C = _resolve_C(cfg.C, p)
    y = data.y.astype(float)

    scales = data.X.std(axis=0) if cfg.standardize else np.ones(p)
    Xs = data.X / scales

    if beta0 is not None:
        beta_s = np.asarray(beta0, dtype=float).ravel() * scales
    elif cfg.init == "logit":
        beta_s = plain_logit(Xs, y)
    else:
        beta_s = np.zeros(p)

    z = Xs @ beta_s
    cdf_vals = special.expit(z)          # initial guess for g: standard logistic
    fit: SieveFit | None = None
    pi_prev = None
    warn_msgs: list[str] = []

    betas = np.empty((cfg.K + 1, p))
    betas[0] = beta_s / scales
    grad_norms = np.empty(cfg.K)
    K_actual = cfg.K
    for k in range(1, cfg.K + 1):
        grad = Xs.T @ (cdf_vals - y) / n
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite mean gradient at iteration {k}")
        step = learning_rate(k, cfg) * (C @ grad)
        beta_s = beta_s - step
        z = Xs @ beta_s
        if (k - 1) % cfg.refit_every == 0:
            basis = build_basis(z, cfg.q)
            fit = fit_series_logit(z, y, cfg.q, basis=basis, pi_init=pi_prev)
            pi_prev = fit.pi
            if fit.separation_suspected and not warn_msgs:
                warn_msgs.append(
                    f"series logit separation suspected at iteration {k}"
                )
        cdf_vals = sieve_cdf(fit, z)
        betas[k] = beta_s / scales
        grad_norms[k - 1] = float(np.linalg.norm(grad))
        if (cfg.early_stop_tol is not None
                and float(np.linalg.norm(step)) < cfg.early_stop_tol):
            K_actual = k
            break

    betas = betas[:K_actual + 1]
    grad_norms = grad_norms[:K_actual]
    # make sure the reported sieve fit corresponds to the final index
    if (K_actual - 1) % cfg.refit_every != 0:
        fit = fit_series_logit(z, y, cfg.q, pi_init=pi_prev)

    path = IteratePath(betas=betas, grad_norms=grad_norms)
    trim = min(cfg.trim_t, K_actual - 1)
    beta_avg = path.average(trim)
    beta_final = betas[-1]
    center = beta_avg if average else beta_final
    return FitResult(
        estimator=estimator,
        beta_final=beta_final,
        beta_avg=beta_avg,
        beta_normalized=normalize_scale(center, cfg.numeraire),
        sieve_fit=fit,
        path=path,
        seconds=time.perf_counter() - t0,
        seed=cfg.seed,
        warnings=tuple(warn_msgs),
    )


def run_ssgd_group(data: Dataset, config: SsgdConfig, beta0=None) -> FitResult:
    """Sieve SGD group estimator: full-sample steps with per-iteration refits."""
    return _run_ssgd(data, config, beta0, average=False, estimator="group")


def run_ssgd_average(data: Dataset, config: SsgdConfig, beta0=None) -> FitResult:
    """Sieve SGD with iterate averaging over iterations 1..K-trim_t."""
    return _run_ssgd(data, config, beta0, average=True, estimator="average")
