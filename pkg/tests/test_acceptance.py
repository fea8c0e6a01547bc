"""End-to-end acceptance checks for the full estimation pipeline.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the captured output of a failing run) and then asserts. The Monte Carlo
fixtures are session-scoped so the expensive runs happen once; the whole
module takes roughly 20 minutes on a single core.

Reference bias/RMSE columns for the n = 5000 designs come from published
simulation tables for this class of estimators; the remaining thresholds
are rate and coverage bands implied by the asymptotic theory.
"""

import math
import warnings

import numpy as np
import pytest

from sievesgd import (DgpSpec, SsgdConfig, generate, logistic_link,
                      normalize_scale, normalized_confidence_intervals,
                      run_monte_carlo, run_sgd_known_g, run_ssgd_group,
                      run_ssgd_average, sandwich_vcov)

BETA0 = np.array([1.0, 1.0, 2.0, 4.0, 5.0, -1.0, -2.0, -4.0, -5.0])

# reference per-coefficient RMSE of the normalized estimates, n = 5000
REFERENCE_RMSE_NORMAL = np.array([0.074159, 0.116748, 0.215743, 0.264365,
                                  0.073209, 0.119057, 0.214129, 0.263349])
REFERENCE_RMSE_CAUCHY_C1 = 0.141747


def _verdict(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def table_run_normal():
    spec = DgpSpec(beta0=BETA0, error_dist="normal", n=5000, seed=20260823)
    cfg = SsgdConfig(q=3, refit_every=10)
    return run_monte_carlo(spec, cfg, 100, estimator="group", n_jobs=1)


@pytest.fixture(scope="session")
def table_run_cauchy():
    spec = DgpSpec(beta0=BETA0, error_dist="cauchy", n=5000, seed=20260824)
    cfg = SsgdConfig(q=3, refit_every=10)
    return run_monte_carlo(spec, cfg, 100, estimator="group", n_jobs=1)


class TestTableReproduction:
    def test_criterion_1_normal_errors(self, table_run_normal):
        rpt = table_run_normal
        ratio = rpt.rmse / REFERENCE_RMSE_NORMAL
        ok = (np.all((0.7 <= ratio) & (ratio <= 1.3))
              and np.all(np.abs(rpt.bias) < 0.03))
        _verdict("1 table-normal", ok,
                 f"rmse ratios {np.round(ratio, 3)}, "
                 f"max |bias| {np.max(np.abs(rpt.bias)):.4f}")

    def test_criterion_2_cauchy_errors(self, table_run_normal,
                                       table_run_cauchy):
        rpt = table_run_cauchy
        ratio1 = rpt.rmse[0] / REFERENCE_RMSE_CAUCHY_C1
        ok = (0.6 <= ratio1 <= 1.4
              and np.all(rpt.rmse >= table_run_normal.rmse))
        _verdict("2 table-cauchy", ok,
                 f"coef-1 rmse ratio {ratio1:.3f}, heavier tails inflate "
                 f"every coefficient: {np.all(rpt.rmse >= table_run_normal.rmse)}")


class TestRates:
    def test_criterion_3_known_link_root_n(self):
        # quadrupling n should roughly halve the RMSE of the averaged
        # known-link SGD estimate
        beta0 = np.array([1.0, -1.0])
        root = np.random.SeedSequence(555)
        rmse = {}
        for n in (4000, 16000):
            errs = []
            for child in root.spawn(100):
                s1, s2 = child.generate_state(2, dtype=np.uint64)
                data = generate(DgpSpec(beta0=beta0, error_dist="logistic",
                                        n=n, seed=int(s1)))
                res = run_sgd_known_g(data, logistic_link(),
                                      SsgdConfig(K=n, seed=int(s2)),
                                      beta0=np.zeros(2))
                errs.append(np.sum((res.beta_avg - beta0) ** 2))
            rmse[n] = math.sqrt(float(np.mean(errs)))
        ratio = rmse[4000] / rmse[16000]
        _verdict("3 known-g rate", 1.4 <= ratio <= 2.9,
                 f"RMSE ratio across 4x n: {ratio:.3f}")

    def test_criterion_4_group_iterate_rate(self):
        # E||beta_K - beta0||^2 against K on a log-log scale; with the
        # sample size tied to K as n = ceil(K^gamma) the slope should be
        # about -gamma = -0.8
        Ks = [250, 1000, 4000]
        root = np.random.SeedSequence(321)
        mses = []
        for K in Ks:
            n = math.ceil(K ** 0.8)
            errs = []
            for child in root.spawn(100):
                s1, s2 = child.generate_state(2, dtype=np.uint64)
                data = generate(DgpSpec(beta0=[1.0], error_dist="logistic",
                                        n=n, seed=int(s1)))
                cfg = SsgdConfig(q=1, K=K, refit_every=5, seed=int(s2))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    res = run_ssgd_group(data, cfg)
                errs.append((res.beta_final[0] - 1.0) ** 2)
            mses.append(float(np.mean(errs)))
        slope = float(np.polyfit(np.log(Ks), np.log(mses), 1)[0])
        _verdict("4 group rate", -1.04 <= slope <= -0.4,
                 f"log-log slope {slope:.3f}")


class TestCoverage:
    def test_criterion_5_sandwich_coverage(self):
        truth = normalize_scale(BETA0)
        root = np.random.SeedSequence(777)
        covered = []
        for child in root.spawn(200):
            s1, s2 = child.generate_state(2, dtype=np.uint64)
            data = generate(DgpSpec(beta0=BETA0, error_dist="normal",
                                    n=5000, seed=int(s1)))
            res = run_ssgd_average(data, SsgdConfig(q=3, refit_every=10,
                                                    seed=int(s2)))
            vc = sandwich_vcov(data, res, include_f=True)
            ci = normalized_confidence_intervals(res, vc, 0.95)
            covered.append((ci[:, 0] <= truth) & (truth <= ci[:, 1]))
        rate = np.mean(covered, axis=0)
        ok = bool(np.all((0.88 <= rate) & (rate <= 0.99)))
        _verdict("5 coverage", ok, f"per-coefficient {np.round(rate, 3)}")


class TestPropertySuites:
    """Compact re-runs of the core numerical properties at their
    stated tolerances (the full versions live in the per-module files)."""

    def test_criterion_6_properties(self):
        from scipy.special import expit
        from sievesgd import (batch_mean_gradient, build_basis, Dataset,
                              fit_series_logit, loss_gradient, loss_value,
                              plain_logit)

        rng = np.random.default_rng(2026)
        checks = {}

        # gradient vs quadrature finite differences (1e-5)
        link = logistic_link()
        x = rng.normal(size=4)
        y, beta, h = 1.0, rng.normal(size=4), 1e-6
        g = loss_gradient(beta, x, y, link)
        fd = np.array([
            (loss_value(beta + h * e, x, y, link)
             - loss_value(beta - h * e, x, y, link)) / (2 * h)
            for e in np.eye(4)
        ])
        checks["gradient-vs-quadrature"] = np.max(np.abs(g - fd)) < 1e-5

        # empirical-loss convexity along segments (1e-10 slack)
        X = rng.normal(size=(200, 3))
        yy = (rng.uniform(size=200) < expit(X @ [1, -1, 0.5])).astype(float)
        data = Dataset(X=X, y=yy.astype(np.int8))

        def emp_loss(b):
            return float(np.mean([loss_value(b, X[i], yy[i], link)
                                  for i in range(200)]))

        ok = True
        for _ in range(20):
            a, b = rng.normal(size=3), rng.normal(size=3)
            mid = emp_loss(0.5 * (a + b))
            ok &= mid <= 0.5 * (emp_loss(a) + emp_loss(b)) + 1e-10
        checks["loss-convexity"] = ok

        # basis orthonormality (1e-6 Frobenius)
        z = rng.normal(size=500)
        B = build_basis(z, 5).design(z)
        checks["basis-orthonormality"] = (
            np.linalg.norm(B.T @ B / 500 - np.eye(5)) < 1e-6)

        # q = 1 sieve equals the plain-logit oracle (1e-8)
        z1 = rng.normal(size=400)
        y1 = (rng.uniform(size=400) < expit(0.8 * z1)).astype(float)
        fit = fit_series_logit(z1, y1, 1)
        d0 = fit.basis.design([0.0])[0, 0]
        d1 = fit.basis.design([1.0])[0, 0]
        composed = np.array([fit.pi[0] + fit.pi[1] * d0,
                             fit.pi[1] * (d1 - d0)])
        oracle = plain_logit(np.column_stack([np.ones(400), z1]), y1)
        checks["q1-equals-plain-logit"] = (
            np.max(np.abs(composed - oracle)) < 1e-8)

        # Newton likelihood ascent
        checks["newton-ascent"] = bool(np.all(np.diff(fit.loglik_path) >= 0))

        # averaging identity (1e-12)
        res = run_ssgd_average(data, SsgdConfig(K=30, q=1, trim_t=4,
                                                seed=1))
        manual = res.path.betas[1:30 - 4 + 1].mean(axis=0)
        checks["averaging-identity"] = (
            np.max(np.abs(res.beta_avg - manual)) < 1e-12)

        # bitwise determinism under a fixed seed
        r1 = run_ssgd_group(data, SsgdConfig(K=30, q=1, seed=9))
        r2 = run_ssgd_group(data, SsgdConfig(K=30, q=1, seed=9))
        checks["seed-determinism"] = bool(
            np.array_equal(r1.path.betas, r2.path.betas))

        # RMSE^2 = bias^2 + variance decomposition (1e-12)
        spec = DgpSpec(beta0=[1.0, -2.0], n=300, seed=6)
        rpt = run_monte_carlo(spec, SsgdConfig(K=40, q=1, refit_every=5),
                              10, estimator="average", n_jobs=1,
                              keep_estimates=True)
        var = rpt.estimates.var(axis=0)
        checks["rmse-bias-decomposition"] = bool(np.all(
            np.abs(rpt.rmse ** 2 - (rpt.bias ** 2 + var)) < 1e-12))

        # a mean-gradient consistency check ties the pieces together
        mg = batch_mean_gradient([0.0, 0.0, 0.0], data.X, data.y, link=link)
        checks["mean-gradient-finite"] = bool(np.all(np.isfinite(mg)))

        for name, ok in checks.items():
            print(f"  property {name}: {'ok' if ok else 'FAILED'}")
        _verdict("6 property suites", all(checks.values()),
                 f"{sum(checks.values())}/{len(checks)} properties")


class TestTiming:
    def test_criterion_7_wall_clock_recorded(self, table_run_normal):
        rpt = table_run_normal
        ok = (rpt.mean_fit_seconds > 0
              and rpt.total_seconds < 1800)
        _verdict("7 timing", ok,
                 f"n=5000 x 100 reps in {rpt.total_seconds:.0f}s, "
                 f"mean fit {rpt.mean_fit_seconds:.2f}s")
