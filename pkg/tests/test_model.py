import numpy as np
import pytest
from scipy import integrate

from sievesgd import (LinkFunction, NumericError, ValidationError,
                      batch_mean_gradient, cauchy_link, logistic_link,
                      loss_gradient, loss_value, normal_link, validate_dataset)


def quad_loss(beta, x, y, g):
    """Independent oracle: G(x'b) - y x'b with G by adaptive quadrature."""
    u = float(np.dot(x, beta))
    G, _ = integrate.quad(g, 0.0, u, limit=500)
    return G - y * u


class TestLossGradient:
    def test_zero_residual_gives_zero_gradient(self):
        # g identically 1 at the evaluated index and y = 1
        link = LinkFunction(g=lambda u: np.ones_like(np.asarray(u, float)),
                            lipschitz_J=1.0)
        g = loss_gradient([1.0, 2.0], [3.0, -1.0], 1, link)
        assert np.array_equal(g, np.zeros(2))

    def test_logistic_at_zero_unit_vector(self):
        x = np.zeros(4)
        x[0] = 1.0
        g = loss_gradient(np.zeros(4), x, 0, logistic_link())
        assert np.allclose(g, [0.5, 0, 0, 0], atol=1e-15)

    def test_matches_finite_difference_of_quadrature_loss(self):
        # [DERIVED] oracle: central finite differences of the quadrature loss
        rng = np.random.default_rng(5)
        link = logistic_link()
        h = 1e-5
        for _ in range(25):
            p = rng.integers(2, 5)
            beta = rng.normal(size=p)
            x = rng.normal(size=p)
            y = int(rng.integers(0, 2))
            grad = loss_gradient(beta, x, y, link)
            fd = np.empty(p)
            for j in range(p):
                e = np.zeros(p)
                e[j] = h
                fd[j] = (quad_loss(beta + e, x, y, link.g)
                         - quad_loss(beta - e, x, y, link.g)) / (2 * h)
            assert np.max(np.abs(grad - fd)) < 1e-6 * (1 + np.max(np.abs(grad)))

    def test_gradient_consistency_many_draws(self):
        # property: 200 random draws at looser 1e-5 tolerance
        rng = np.random.default_rng(11)
        link = logistic_link()
        h = 1e-5
        worst = 0.0
        for _ in range(200):
            beta = rng.normal(size=3)
            x = rng.normal(size=3)
            y = int(rng.integers(0, 2))
            grad = loss_gradient(beta, x, y, link)
            fd = np.empty(3)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                fd[j] = (quad_loss(beta + e, x, y, link.g)
                         - quad_loss(beta - e, x, y, link.g)) / (2 * h)
            worst = max(worst,
                        np.max(np.abs(grad - fd)) / (1 + np.max(np.abs(grad))))
        assert worst < 1e-5

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loss_gradient([1.0, 2.0], [1.0, 2.0, 3.0], 0, logistic_link())

    def test_overflow_raises_numeric_error(self):
        with pytest.raises(NumericError):
            loss_gradient([1e308, 1e308], [1e308, 1e308], 0, logistic_link())


class TestLossValue:
    def test_constant_half_link(self):
        link = LinkFunction(g=lambda u: 0.5 * np.ones_like(np.asarray(u, float)),
                            lipschitz_J=0.0)
        v = loss_value([2.0], [1.0], 0, link)
        assert abs(v - 1.0) < 1e-10

    def test_zero_beta_gives_zero(self):
        for link in (logistic_link(), normal_link(), cauchy_link()):
            assert loss_value(np.zeros(3), [1.0, 2.0, 3.0], 0, link) == 0.0

    def test_midpoint_convexity(self):
        # [DERIVED] convexity oracle by direct evaluation on random pairs
        rng = np.random.default_rng(3)
        link = logistic_link()
        x = np.array([0.7, -1.2])
        for _ in range(1000):
            b1, b2 = rng.normal(size=2), rng.normal(size=2)
            y = int(rng.integers(0, 2))
            mid = loss_value(0.5 * (b1 + b2), x, y, link)
            assert mid <= 0.5 * (loss_value(b1, x, y, link)
                                 + loss_value(b2, x, y, link)) + 1e-10

    @pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
    def test_convex_combinations(self, lam):
        rng = np.random.default_rng(17)
        link = normal_link()
        for _ in range(100):
            b1, b2 = rng.normal(size=3), rng.normal(size=3)
            x = rng.normal(size=3)
            y = int(rng.integers(0, 2))
            lhs = loss_value(lam * b1 + (1 - lam) * b2, x, y, link)
            rhs = (lam * loss_value(b1, x, y, link)
                   + (1 - lam) * loss_value(b2, x, y, link))
            assert lhs <= rhs + 1e-10


def test_monotone_mean_gradient():
    # (b1 - b2)'(grad(b1) - grad(b2)) >= 0 for the empirical loss, any
    # nondecreasing g
    rng = np.random.default_rng(29)
    X = rng.normal(size=(50, 3))
    y = rng.integers(0, 2, size=50).astype(float)
    links = [logistic_link(), normal_link(), cauchy_link(),
             LinkFunction(g=lambda u: np.clip(0.5 + 0.1 * np.asarray(u), 0, 1),
                          lipschitz_J=0.1)]
    for link in links:
        for _ in range(50):
            b1, b2 = rng.normal(size=3), rng.normal(size=3)
            g1 = batch_mean_gradient(b1, X, y, link=link)
            g2 = batch_mean_gradient(b2, X, y, link=link)
            assert (b1 - b2) @ (g1 - g2) >= -1e-10


class TestValidateDataset:
    def test_valid(self):
        data = validate_dataset([[1.0, 2.0], [3.0, 1.0], [0.0, 5.0]],
                                [0, 1, 1])
        assert data.n == 3 and data.p == 2

    def test_non_binary_outcome(self):
        with pytest.raises(ValidationError) as exc:
            validate_dataset([[1.0, 2.0], [3.0, 1.0], [0.0, 5.0]], [0, 2, 1])
        v = exc.value.violations
        assert any(x.code == "non_binary_outcome" and x.index == 1 for x in v)

    def test_constant_column(self):
        with pytest.raises(ValidationError) as exc:
            validate_dataset([[1.0, 2.0], [1.0, 1.0], [1.0, 5.0]], [0, 1, 1])
        assert any(x.code == "constant_column" and x.index == 0
                   for x in exc.value.violations)

    def test_non_finite_entry(self):
        with pytest.raises(ValidationError) as exc:
            validate_dataset([[1.0, np.nan], [3.0, 1.0], [0.0, 5.0]], [0, 1, 1])
        assert any(x.code == "non_finite_entry" for x in exc.value.violations)

    def test_too_few_rows(self):
        with pytest.raises(ValidationError) as exc:
            validate_dataset([[1.0, 2.0, 3.0]], [1])
        assert any(x.code == "too_few_rows" for x in exc.value.violations)

    def test_multiple_violations_collected(self):
        with pytest.raises(ValidationError) as exc:
            validate_dataset([[1.0, 2.0], [1.0, 1.0], [1.0, 5.0]], [0, 3, 1])
        codes = {x.code for x in exc.value.violations}
        assert {"non_binary_outcome", "constant_column"} <= codes
