"""Plug-in sandwich covariance and studentized confidence intervals.

The averaged estimator is asymptotically normal with covariance
S2^-1 S1 S2^-1 where S1 = E g(z)(1-g(z)) x x' and S2 = E g'(z) x x' - f,
f being a correction for the estimated link. Both pieces are estimated by
sample analogs with the fitted sieve CDF in place of g. An alternative
("whitened") variance expression appears in the source material; it is
available behind a flag and neither form is declared canonical here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, NonInvertibleError
from .estimator import FitResult, normalize_scale
from .model import Dataset
from .sieve import SieveFit, sieve_cdf, sieve_cdf_derivative

__all__ = [
    "SandwichVcov",
    "estimate_sigma1",
    "estimate_sigma2",
    "sandwich_vcov",
    "confidence_intervals",
    "normalized_vcov",
    "normalized_confidence_intervals",
    "directional_statistic",
]


@dataclass(frozen=True)
class SandwichVcov:
    """Sandwich pieces plus the assembled covariance of the estimator."""

    sigma1_hat: np.ndarray
    sigma2_hat: np.ndarray
    vcov: np.ndarray             # S2^-1 S1 S2^-T / n
    n: int
    f_correction_included: bool
    whitened: bool
    sigma2_rcond: float


def estimate_sigma1(data: Dataset, beta, fit: SieveFit) -> np.ndarray:
    """Sample analog of the meat: (1/n) sum g(z)(1-g(z)) x x'."""
    beta = np.asarray(beta, dtype=float).ravel()
    z = data.X @ beta
    p_hat = sieve_cdf(fit, z)
    w = p_hat * (1.0 - p_hat)
    return (data.X * w[:, None]).T @ data.X / data.n


def _f_correction(data: Dataset, z, gprime, fit: SieveFit) -> np.ndarray:
    """Sample analog of f: (1/n^2) sum_k sum_i x_k R(z_k)' R'(z_i) g'(z_i) x_i'.

    Factored as an outer product of two O(n q p) accumulations; the
    double loop is kept only as a test oracle.
    """
    R = fit.basis.design(z)                  # (n, q)
    Rp = fit.basis.design_derivative(z)      # (n, q)
    M1 = data.X.T @ R / data.n               # (p, q)
    M2 = (Rp * gprime[:, None]).T @ data.X / data.n   # (q, p)
    return M1 @ M2


def estimate_sigma2(data: Dataset, beta, fit: SieveFit,
                    include_f: bool = True) -> np.ndarray:
    """Sample analog of the bread: (1/n) sum g'(z) x x' minus the f correction."""
    beta = np.asarray(beta, dtype=float).ravel()
    z = data.X @ beta
    gprime = sieve_cdf_derivative(fit, z)
    bread = (data.X * gprime[:, None]).T @ data.X / data.n
    if include_f:
        bread = bread - _f_correction(data, z, gprime, fit)
    return bread


def _whitened_sigmas(data: Dataset, beta, fit: SieveFit):
    """Alternative variance expressions with the 1/beta loading vector."""
    beta = np.asarray(beta, dtype=float).ravel()
    if np.any(np.abs(beta) <= 1e-10):
        raise ConfigError("whitened variance needs all coefficients nonzero")
    ell = 1.0 / beta
    z = data.X @ beta
    p_hat = sieve_cdf(fit, z)
    w = p_hat * (1.0 - p_hat)
    U = data.X + z[:, None] * ell            # x + (x'beta) l, row-wise
    sigma1 = (U * w[:, None]).T @ U / data.n
    gprime = sieve_cdf_derivative(fit, z)
    xx = (data.X * gprime[:, None]).T @ data.X / data.n
    sigma2 = (np.eye(data.p) + np.outer(ell, beta)) @ xx
    return sigma1, sigma2


def sandwich_vcov(data: Dataset, result: FitResult, include_f: bool = True,
                  whitened: bool = False) -> SandwichVcov:
    """Assemble S2^-1 S1 S2^-T / n around the averaged estimator."""
    if result.sieve_fit is None:
        raise ConfigError("sandwich covariance needs a sieve fit on the result")
    beta = result.beta_avg
    if whitened:
        sigma1, sigma2 = _whitened_sigmas(data, beta, result.sieve_fit)
        include_f = False
    else:
        sigma1 = estimate_sigma1(data, beta, result.sieve_fit)
        sigma2 = estimate_sigma2(data, beta, result.sieve_fit, include_f)
    rcond = _rcond(sigma2)
    if rcond < 1e-12:
        raise NonInvertibleError(
            f"sigma2 numerically singular (rcond = {rcond:.3e})", rcond
        )
    s2inv = np.linalg.solve(sigma2, np.eye(data.p))
    vcov = s2inv @ sigma1 @ s2inv.T / data.n
    vcov = 0.5 * (vcov + vcov.T)
    return SandwichVcov(
        sigma1_hat=sigma1, sigma2_hat=sigma2, vcov=vcov, n=data.n,
        f_correction_included=include_f, whitened=whitened,
        sigma2_rcond=rcond,
    )


def _rcond(A: np.ndarray) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    return float(s.min() / s.max()) if s.max() > 0 else 0.0


def confidence_intervals(result: FitResult, vcov: SandwichVcov,
                         level: float = 0.95) -> np.ndarray:
    """Per-coefficient normal intervals beta_j +- z * sqrt(vcov_jj).

    Returns an array of shape (p, 2).
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level = {level} must lie in (0, 1)")
    zq = stats.norm.ppf(0.5 * (1.0 + level))
    half = zq * np.sqrt(np.diag(vcov.vcov))
    beta = result.beta_avg
    return np.column_stack([beta - half, beta + half])


def directional_statistic(result: FitResult, vcov: SandwichVcov, direction,
                          null_value: float = 0.0) -> float:
    """Studentized statistic for a unit direction s: s'(beta - b0) / se.

    With s a coordinate vector this reproduces the per-coefficient
    z statistic exactly.
    """
    s = np.asarray(direction, dtype=float).ravel()
    norm = np.linalg.norm(s)
    if not np.isclose(norm, 1.0, atol=1e-8):
        raise ConfigError("direction must have unit norm")
    se = float(np.sqrt(s @ vcov.vcov @ s))
    return float(s @ result.beta_avg - null_value) / se


def normalized_vcov(result: FitResult, vcov: SandwichVcov,
                    numeraire: int = 0) -> np.ndarray:
    """Delta-method covariance of the numeraire-normalized ratios.

    The ratio map r_j = beta_j / beta_num annihilates the scale
    direction, which is exactly the direction the index model leaves
    unidentified, so the transformed covariance stays well behaved even
    when the raw covariance is ill conditioned along beta itself.
    """
    beta = result.beta_avg
    b0 = beta[numeraire]
    if abs(b0) <= 1e-10:
        raise ConfigError("numeraire coefficient numerically zero")
    p = beta.shape[0]
    others = [j for j in range(p) if j != numeraire]
    J = np.zeros((p - 1, p))
    for row, j in enumerate(others):
        J[row, j] = 1.0 / b0
        J[row, numeraire] = -beta[j] / b0 ** 2
    return J @ vcov.vcov @ J.T


def normalized_confidence_intervals(result: FitResult, vcov: SandwichVcov,
                                    level: float = 0.95,
                                    numeraire: int = 0) -> np.ndarray:
    """Normal intervals for the normalized (ratio) coefficients, (p-1, 2)."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level = {level} must lie in (0, 1)")
    ratios = normalize_scale(result.beta_avg, numeraire)
    V = normalized_vcov(result, vcov, numeraire)
    zq = stats.norm.ppf(0.5 * (1.0 + level))
    half = zq * np.sqrt(np.diag(V))
    return np.column_stack([ratios - half, ratios + half])
