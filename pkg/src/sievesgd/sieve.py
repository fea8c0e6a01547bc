"""Orthonormal polynomial basis over a scalar index and the series logit.

The basis standardizes the index, forms monomials u, u^2, ..., u^q and
orthonormalizes them against the sample through a triangular transform
(thin QR of the centered monomial matrix). Non-constant columns then have
sample mean 0 and sample second-moment matrix equal to the identity. The
series logit fits y on (intercept, basis columns) by Newton iteration
with step halving, which is globally convergent on the concave logit
log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .errors import DegenerateIndexError, NumericError, RankError

__all__ = [
    "SieveBasis",
    "SieveFit",
    "build_basis",
    "fit_series_logit",
    "sieve_cdf",
    "sieve_cdf_derivative",
    "plain_logit",
]

PROB_CLIP = 1e-12


def _monomials(u: np.ndarray, q: int) -> np.ndarray:
    """Columns u^1 .. u^q by multiplicative recurrence."""
    P = np.empty((u.shape[0], q))
    P[:, 0] = u
    for j in range(1, q):
        np.multiply(P[:, j - 1], u, out=P[:, j])
    return P


@dataclass(frozen=True)
class SieveBasis:
    """Centering/scaling plus the triangular orthonormalizing transform.

    Columns are evaluated at new points z as
    ``(powers((z - center)/scale) - power_means) @ transform``.
    """

    order_q: int
    center: float
    scale: float
    power_means: np.ndarray       # sample means of u^1..u^q on training data
    transform: np.ndarray         # q x q upper triangular
    condition_number: float
    max_row_norm: float           # diagnostic: sup ||R(z_i)|| on training data

    def _powers(self, z) -> np.ndarray:
        u = (np.asarray(z, dtype=float).ravel() - self.center) / self.scale
        return _monomials(u, self.order_q)

    def design(self, z) -> np.ndarray:
        """Evaluate the q non-constant basis columns at z."""
        return (self._powers(z) - self.power_means) @ self.transform

    def design_derivative(self, z) -> np.ndarray:
        """d/dz of each basis column at z (chain rule through scaling)."""
        u = (np.asarray(z, dtype=float).ravel() - self.center) / self.scale
        q = self.order_q
        dP = np.empty((u.shape[0], q))
        dP[:, 0] = 1.0 / self.scale
        if q > 1:
            P = _monomials(u, q - 1)
            for j in range(2, q + 1):
                dP[:, j - 1] = (j / self.scale) * P[:, j - 2]
        return dP @ self.transform


@dataclass(frozen=True)
class SieveFit:
    """Series-logit fit: intercept pi[0] plus q basis-column slopes."""

    pi: np.ndarray
    basis: SieveBasis
    loglik: float
    newton_iters: int
    converged: bool
    separation_suspected: bool
    loglik_path: np.ndarray = field(repr=False, default=None)


def build_basis(z, q: int) -> SieveBasis:
    """Build the empirically orthonormal polynomial basis of order q."""
    z = np.asarray(z, dtype=float).ravel()
    n = z.shape[0]
    if q < 1:
        raise ValueError("q must be >= 1")
    if n <= q + 1:
        raise ValueError(f"need n > q + 1, got n = {n}, q = {q}")
    center = float(z.mean())
    scale = float(z.std())
    if not np.isfinite(scale) or scale <= 0.0:
        raise DegenerateIndexError("index has zero sample variance")

    u = (z - center) / scale
    P = _monomials(u, q)
    power_means = P.mean(axis=0)
    Pc = P - power_means
    Q, R = np.linalg.qr(Pc)
    # fix QR sign convention so the transform is reproducible
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    R = signs[:, None] * R

    diag = np.abs(np.diag(R))
    tol = max(n, q) * np.finfo(float).eps * diag.max()
    deficient = np.nonzero(diag < tol)[0]
    if deficient.size:
        raise RankError(requested=q, achievable=int(deficient[0]))

    transform = np.sqrt(n) * linalg.solve_triangular(
        R, np.eye(q), lower=False
    )
    B = Pc @ transform
    basis = SieveBasis(
        order_q=q,
        center=center,
        scale=scale,
        power_means=power_means,
        transform=transform,
        condition_number=float(np.linalg.cond(transform)),
        max_row_norm=float(np.sqrt((B ** 2).sum(axis=1).max())),
    )
    return basis


def _logit_loglik(y, eta) -> float:
    p = np.clip(special.expit(eta), PROB_CLIP, 1.0 - PROB_CLIP)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _newton_logit(D, y, pi0, max_iter, tol, ridge):
    """Maximize the logit log-likelihood of y on columns of D.

    Newton with step halving; the log-likelihood is nondecreasing along
    the iterate path by construction.
    """
    n, m = D.shape
    pi = np.zeros(m) if pi0 is None else np.asarray(pi0, dtype=float).copy()
    eta = D @ pi
    ll = _logit_loglik(y, eta)
    path = [ll]
    converged = False
    iters = 0
    for iters in range(1, max_iter + 1):
        p = special.expit(eta)
        grad = D.T @ (y - p) / n
        if np.max(np.abs(grad)) < tol:
            converged = True
            iters -= 1
            break
        w = p * (1.0 - p)
        H = (D * w[:, None]).T @ D / n + ridge * np.eye(m)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular Hessian in series logit: {exc}") from exc
        s = 1.0
        for _ in range(60):
            eta_new = D @ (pi + s * step)
            ll_new = _logit_loglik(y, eta_new)
            if ll_new >= ll:
                break
            s *= 0.5
        else:
            # no ascent direction found numerically; stop here
            break
        pi = pi + s * step
        eta = eta_new
        ll = ll_new
        path.append(ll)
    separation = (not converged) and bool(np.max(np.abs(eta)) > 30.0)
    return pi, ll, iters, converged, separation, np.asarray(path)


def fit_series_logit(z, y, q: int, basis: SieveBasis | None = None,
                     pi_init=None, max_iter: int = 100, tol: float = 1e-10,
                     ridge: float = 1e-8) -> SieveFit:
    """Fit the series logit of y on (1, basis columns of z).

    On perfect separation the likelihood is unbounded; the fit returned
    at the iteration cap carries ``converged=False`` and
    ``separation_suspected=True`` and callers proceed with it.
    """
    z = np.asarray(z, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if basis is None:
        basis = build_basis(z, q)
    D = np.column_stack([np.ones(z.shape[0]), basis.design(z)])
    pi, ll, iters, converged, separation, path = _newton_logit(
        D, y, pi_init, max_iter, tol, ridge
    )
    return SieveFit(pi=pi, basis=basis, loglik=ll, newton_iters=iters,
                    converged=converged, separation_suspected=separation,
                    loglik_path=path)


def sieve_cdf(fit: SieveFit, z_new) -> np.ndarray:
    """Fitted CDF: logistic of the polynomial index, clamped away from 0/1."""
    eta = fit.pi[0] + fit.basis.design(z_new) @ fit.pi[1:]
    return np.clip(special.expit(eta), PROB_CLIP, 1.0 - PROB_CLIP)


def sieve_cdf_derivative(fit: SieveFit, z_new) -> np.ndarray:
    """Analytic d/dz of the fitted CDF (chain rule, never finite-differenced)."""
    eta = fit.pi[0] + fit.basis.design(z_new) @ fit.pi[1:]
    p = special.expit(eta)
    return p * (1.0 - p) * (fit.basis.design_derivative(z_new) @ fit.pi[1:])


def plain_logit(X, y, intercept: bool = False, max_iter: int = 100,
                tol: float = 1e-10, ridge: float = 1e-10) -> np.ndarray:
    """Ordinary logistic-regression MLE of y on X (optionally with intercept).

    Used as the warm start for the sieve SGD loop; intentionally shares
    the Newton engine with the series logit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    D = np.column_stack([np.ones(X.shape[0]), X]) if intercept else X
    pi, _, _, _, _, _ = _newton_logit(D, y, None, max_iter, tol, ridge)
    return pi
