"""Data model, convex loss and gradient for the binary index model.

The model is y = 1{x'b > e} with e drawn from an unknown CDF g. The
per-observation loss is zeta(b) = G(x'b) - y * x'b where G' = g; since g
is nondecreasing, G is convex and so is the loss. Only g enters the
gradient, so G is evaluated (by quadrature) purely for diagnostics and
test oracles, never inside any estimation loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .errors import NumericError, ValidationError, Violation

__all__ = [
    "Dataset",
    "LinkFunction",
    "logistic_link",
    "normal_link",
    "cauchy_link",
    "validate_dataset",
    "loss_gradient",
    "loss_value",
    "batch_mean_gradient",
]


@dataclass(frozen=True)
class Dataset:
    """Validated estimation input: n x p regressors and a binary outcome.

    Immutable after construction; build through :func:`validate_dataset`.
    """

    X: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LinkFunction:
    """CDF of the error term together with its Lipschitz bound.

    ``g`` maps scalars (or arrays, elementwise) into [0, 1] and must be
    nondecreasing; ``lipschitz_J`` bounds g(b) - g(a) <= J (b - a).
    """

    g: Callable[[np.ndarray], np.ndarray]
    lipschitz_J: float
    name: str = "custom"


def logistic_link() -> LinkFunction:
    return LinkFunction(g=special.expit, lipschitz_J=0.25, name="logistic")


def normal_link() -> LinkFunction:
    return LinkFunction(
        g=stats.norm.cdf, lipschitz_J=1.0 / np.sqrt(2.0 * np.pi), name="normal"
    )


def cauchy_link() -> LinkFunction:
    return LinkFunction(g=stats.cauchy.cdf, lipschitz_J=1.0 / np.pi, name="cauchy")


def validate_dataset(X, y) -> Dataset:
    """Check dataset invariants and return an immutable :class:`Dataset`.

    Every breach is collected into a :class:`ValidationError` with a
    distinct code:

    - ``non_binary_outcome``: a y entry other than exactly 0 or 1
    - ``non_finite_entry``: NaN/inf in X
    - ``constant_column``: a column of X with no variation (the sieve
      intercept absorbs location, so such a column is unidentified)
    - ``too_few_rows``: n < p + 1
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    violations: list[Violation] = []

    if X.shape[0] != y.shape[0]:
        raise ValidationError(
            [Violation("shape_mismatch", None,
                       f"X has {X.shape[0]} rows but y has {y.shape[0]}")]
        )

    bad_y = np.nonzero(~((y == 0.0) | (y == 1.0)))[0]
    for row in bad_y:
        violations.append(
            Violation("non_binary_outcome", int(row),
                      f"y[{row}] = {y[row]!r} is not 0 or 1")
        )

    if not np.all(np.isfinite(X)):
        rows = np.nonzero(~np.isfinite(X).all(axis=1))[0]
        for row in rows:
            violations.append(
                Violation("non_finite_entry", int(row),
                          f"X row {row} contains a non-finite entry")
            )

    n, p = X.shape
    if n < p + 1:
        violations.append(
            Violation("too_few_rows", None, f"n = {n} < p + 1 = {p + 1}")
        )

    if np.all(np.isfinite(X)):
        for j in range(p):
            col = X[:, j]
            if np.all(col == col[0]):
                violations.append(
                    Violation("constant_column", j, f"X column {j} is constant")
                )

    if violations:
        raise ValidationError(violations)
    return Dataset(X=X.copy(), y=y.astype(np.int8))


def _check_beta(beta, p: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != p:
        raise ValueError(f"beta has length {beta.shape[0]}, expected {p}")
    return beta


def loss_gradient(beta, x, y, link: LinkFunction) -> np.ndarray:
    """Gradient of the convex loss at one observation: (g(x'b) - y) x."""
    x = np.asarray(x, dtype=float).ravel()
    beta = _check_beta(beta, x.shape[0])
    u = float(x @ beta)
    if not np.isfinite(u):
        raise NumericError(f"non-finite index x'beta = {u} for this observation")
    return (float(link.g(u)) - float(y)) * x


def loss_value(beta, x, y, link: LinkFunction, quad_tol: float = 1e-10) -> float:
    """Loss zeta(b) = G(x'b) - y x'b with G(u) = int_0^u g.

    The lower limit 0 is an arbitrary constant; values are comparable
    only within a fixed link. Diagnostic/test use only.
    """
    x = np.asarray(x, dtype=float).ravel()
    beta = _check_beta(beta, x.shape[0])
    u = float(x @ beta)
    if not np.isfinite(u):
        raise NumericError(f"non-finite index x'beta = {u}")
    big_g, err = integrate.quad(lambda t: float(link.g(t)), 0.0, u,
                                epsabs=quad_tol, epsrel=quad_tol, limit=500)
    if not np.isfinite(big_g) or err > 1e-6 * (1.0 + abs(big_g)):
        raise NumericError(f"quadrature for G({u}) did not converge (err={err})")
    return big_g - float(y) * u


def batch_mean_gradient(beta, X, y, probs=None, link: LinkFunction | None = None
                        ) -> np.ndarray:
    """Mean loss gradient over rows: (1/n) X' (g(Xb) - y).

    Either precomputed fitted probabilities ``probs`` or a ``link`` must
    be supplied. Summation order is fixed, so results are reproducible.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    beta = _check_beta(beta, X.shape[1])
    if probs is None:
        if link is None:
            raise ValueError("need probs or link")
        u = X @ beta
        bad = np.nonzero(~np.isfinite(u))[0]
        if bad.size:
            raise NumericError(f"non-finite index at row {int(bad[0])}")
        probs = np.asarray(link.g(u), dtype=float)
    resid = probs - y
    return X.T @ resid / X.shape[0]
