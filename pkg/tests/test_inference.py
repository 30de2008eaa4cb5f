import unittest
import sys
import os
import math

import numpy as np
from scipy import stats

# Add parent directory to path to import modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from infrastructure.errors import ConfigError, SingularSandwichError
from infrastructure.schemas import (
    Dataset, DebiasedPath, PrecisionEstimate, QuantileFit, TauGrid,
)
from inference.bands import pointwise_ci, simultaneous_band, uniform_band
from inference.critical_values import (
    bessel_sup_quantile, chi2_quantile, kolmogorov_sup_quantile, normal_quantile,
    simulate_bridge_sups,
)
from inference.debias import debias, debias_path, sandwich_form
from inference.wald import (
    coefficient_hypothesis, dominance_hypothesis, structural_hypothesis, sup_wald, wald_stat,
)
from precision.clime import estimate_precision
from quantile_fit.penalized_fit import fit_path, fit_penalized
from rank_scores.rank_scores import scale_statistic_path
from rank_scores.sparsity import known_sparsity

FAST_MC = dict(n_paths=20000, n_steps=200)


def identity_precision(q, Sigma=None):
    Sigma = np.eye(q) if Sigma is None else np.asarray(Sigma, dtype=float)
    return PrecisionEstimate(D_hat=np.eye(q), gamma_n=0.1, L_n=1.0, column_log=[], Sigma_hat=Sigma)


def synthetic_path(grid, beta_rows, sparsity, n, precision):
    return DebiasedPath(grid=grid, beta_check=np.asarray(beta_rows, dtype=float),
                        sparsity_used=np.full(len(grid), sparsity), precision=precision, n=n)


class TestCriticalValues(unittest.TestCase):
    def test_normal(self):
        self.assertAlmostEqual(normal_quantile(0.025).value, 1.959964, places=5)
        with self.assertRaises(ConfigError):
            normal_quantile(1.5)

    def test_kolmogorov(self):
        self.assertAlmostEqual(kolmogorov_sup_quantile(0.05).value, 1.3581, delta=1e-3)
        self.assertAlmostEqual(kolmogorov_sup_quantile(0.01).value, 1.6276, delta=1e-3)
        values = [kolmogorov_sup_quantile(a).value for a in (0.01, 0.05, 0.10)]
        self.assertGreater(values[0], values[1])
        self.assertGreater(values[1], values[2])

    def test_chi2(self):
        self.assertAlmostEqual(chi2_quantile(1, 0.95), 3.8415, delta=1e-3)
        self.assertAlmostEqual(chi2_quantile(2, 0.95), -2.0 * math.log(0.05), delta=1e-3)
        for d in (1, 3, 7):
            self.assertAlmostEqual(chi2_quantile(d, 0.9), stats.chi2.ppf(0.9, d), places=8)
        self.assertLess(chi2_quantile(2, 0.9), chi2_quantile(2, 0.95))
        self.assertLess(chi2_quantile(2, 0.95), chi2_quantile(3, 0.95))
        with self.assertRaises(ConfigError):
            chi2_quantile(0, 0.95)

    def test_bridge_defaults_match_series(self):
        mc = bessel_sup_quantile(1, (0.0, 1.0), 0.05)
        series = kolmogorov_sup_quantile(0.05).value
        self.assertAlmostEqual(mc.value / series, 1.0, delta=0.015)
        other = bessel_sup_quantile(1, (0.0, 1.0), 0.05, seed=12345)
        self.assertAlmostEqual(other.value / mc.value, 1.0, delta=0.01)
        self.assertEqual(mc.metadata["n_paths"], 100000)

    def test_singleton_bessel_is_chi2(self):
        crit = bessel_sup_quantile(1, TauGrid.single(0.5), 0.05, functional="qd2")
        self.assertAlmostEqual(crit.value / 3.841, 1.0, delta=0.02)

    def test_monotone_in_dimension(self):
        grid = TauGrid.span(0.2, 0.8, 0.05)
        values = [bessel_sup_quantile(d, grid, 0.05, seed=3, functional="qd", **FAST_MC).value
                  for d in (1, 2, 3)]
        self.assertLessEqual(values[0], values[1])
        self.assertLessEqual(values[1], values[2])

    def test_deterministic_and_worker_free(self):
        a = simulate_bridge_sups(2, (0.2, 0.8), seed=9, workers=1, **FAST_MC)
        b = simulate_bridge_sups(2, (0.2, 0.8), seed=9, workers=3, **FAST_MC)
        np.testing.assert_array_equal(a, b)
        with self.assertRaises(ConfigError):
            simulate_bridge_sups(1, (0.0, 1.0), functional="qd3")


class TestDebias(unittest.TestCase):
    def make_fit(self, residuals, tau=0.5, beta=(0.2,)):
        r = np.asarray(residuals, dtype=float)
        return QuantileFit(tau=tau, beta=np.asarray(beta, dtype=float), residuals=r, objective=0.0,
                           penalties=np.zeros(len(beta)), lp_status="Optimal")

    def test_balanced_scores_leave_fit_unchanged(self):
        data = Dataset(Y=np.arange(4.0), X=np.ones((4, 1)))
        D = identity_precision(1)
        np.testing.assert_array_equal(debias(self.make_fit([1.0, 2.0, -1.0, -3.0]), D, 2.0, data), [0.2])
        # a zero residual scores tau
        np.testing.assert_array_equal(debias(self.make_fit([1.0, 0.0, -1.0, -3.0]), D, 2.0, data), [0.2])
        shifted = debias(self.make_fit([1.0, 0.0, 0.0, -3.0]), D, 2.0, data)
        self.assertAlmostEqual(shifted[0], 0.2 + 2.0 * 0.25, places=12)
        with self.assertRaises(ConfigError):
            debias(self.make_fit([1.0]), D, 0.0, data)

    def test_low_dimensional_correction_bound(self):
        rng = np.random.default_rng(0)
        n, p = 200, 5
        data = Dataset.from_covariates(rng.normal(size=n) + rng.normal(size=(n, p)) @ np.ones(p),
                                       rng.normal(size=(n, p)))
        D = estimate_precision(data, gamma=0.02, L=50.0)
        fit = fit_penalized(data, 0.5, np.zeros(p + 1))
        sparsity = 2.5
        check = debias(fit, D, sparsity, data)
        bound = sparsity * np.abs(data.X @ D.D_hat).max() * (p + 1) / n
        self.assertLessEqual(np.abs(check - fit.beta).max(), bound + 1e-12)

    def test_path_modes(self):
        rng = np.random.default_rng(1)
        n, p = 80, 4
        data = Dataset.from_covariates(rng.normal(size=(n, p))[:, 0] + rng.normal(size=n),
                                       rng.normal(size=(n, p)))
        grid = TauGrid.span(0.4, 0.6, 0.1)
        path = fit_path(data, grid, 0.3)
        D = estimate_precision(data)
        scale = scale_statistic_path(data, TauGrid.span(0.1, 0.9, 0.01), 0.3)
        estimated = debias_path(path, D, scale, 0.1, data)
        known = debias_path(path, D, None, None, data, mode="known", known="normal")
        self.assertEqual(estimated.beta_check.shape, (3, p + 1))
        np.testing.assert_allclose(known.sparsity_used,
                                   [known_sparsity("normal")(t) for t in grid.points], rtol=1e-12)
        for k in range(3):
            correction = (known.beta_check[k] - path.fits[k].beta) / known.sparsity_used[k]
            gap = np.abs(estimated.beta_check[k] - known.beta_check[k]).max()
            bound = 2 * abs(estimated.sparsity_used[k] - known.sparsity_used[k]) * np.abs(correction).max()
            self.assertLessEqual(gap, bound + 1e-12)
        single_path = fit_path(data, TauGrid.single(0.5), 0.3)
        single = debias_path(single_path, D, scale, 0.1, data)
        self.assertAlmostEqual(single_path.fits[0].objective, path.fit_at(0.5).objective, delta=1e-10)
        self.assertAlmostEqual(single.sparsity_used[0], estimated.at(0.5)[1], places=12)
        again = debias_path(path, D, scale, 0.1, data)
        np.testing.assert_array_equal(again.beta_check, estimated.beta_check)
        with self.assertRaises(ConfigError):
            debias_path(path, D, None, None, data)

    def test_non_psd_sandwich_warns(self):
        D = identity_precision(1, Sigma=[[-1.0]])
        with self.assertLogs("inference.debias", level="WARNING"):
            self.assertEqual(sandwich_form(D, [1.0]), 1.0)


class TestBands(unittest.TestCase):
    def test_pointwise_arithmetic(self):
        grid = TauGrid.single(0.5)
        dpath = synthetic_path(grid, [[0.3]], 1.0, 100, identity_precision(1))
        ci = pointwise_ci(dpath, [1.0], 0.5, 0.025)
        self.assertAlmostEqual(ci.half_width, 1.959964 * 0.5 / 10, places=6)
        self.assertAlmostEqual(ci.estimate, 0.3)
        self.assertLess(pointwise_ci(dpath, [1.0], 0.5, 0.49999).half_width, 1e-5)
        wide = pointwise_ci(synthetic_path(grid, [[0.3]], 1.0, 400, identity_precision(1)), [1.0], 0.5, 0.025)
        self.assertAlmostEqual(ci.half_width / wide.half_width, 2.0, places=12)
        with self.assertRaises(ConfigError):
            pointwise_ci(dpath, [1.0], 0.5, 0.5)

    def test_band_wider_than_pointwise(self):
        grid = TauGrid.span(0.2, 0.8, 0.1)
        dpath = synthetic_path(grid, np.zeros((len(grid), 2)), 1.5, 200, identity_precision(2))
        band = uniform_band(dpath, [0.0, 1.0], alpha=0.05, **FAST_MC)
        self.assertGreater(band.critical_value.value, normal_quantile(0.05).value)
        for ci in band.intervals:
            self.assertGreater(ci.half_width, pointwise_ci(dpath, [0.0, 1.0], ci.tau, 0.05).half_width)
        self.assertTrue(uniform_band(dpath, [0.0, 1.0], reference=0.0, **FAST_MC).covered)
        self.assertFalse(uniform_band(dpath, [0.0, 1.0], reference=lambda t: 5.0, **FAST_MC).covered)
        literal = uniform_band(dpath, [0.0, 1.0], alpha=0.05, calibration="kolmogorov")
        self.assertAlmostEqual(literal.critical_value.value, 1.3581, delta=1e-3)

    def test_singleton_band_with_z_is_pointwise(self):
        grid = TauGrid.span(0.3, 0.7, 0.1)
        dpath = synthetic_path(grid, np.ones((len(grid), 2)), 1.2, 150, identity_precision(2))
        band = uniform_band(dpath, [0.0, 1.0], T=TauGrid.single(0.4), alpha=0.025,
                            critical_value=normal_quantile(0.025))
        ci = pointwise_ci(dpath, [0.0, 1.0], 0.4, 0.025)
        self.assertEqual(len(band.intervals), 1)
        self.assertAlmostEqual(band.intervals[0].lower, ci.lower, places=12)
        self.assertAlmostEqual(band.intervals[0].upper, ci.upper, places=12)

    def test_simultaneous_band(self):
        grid = TauGrid.span(0.2, 0.8, 0.1)
        dpath = synthetic_path(grid, np.zeros((len(grid), 4)), 1.0, 100, identity_precision(4))
        e = [0.0, 1.0, 0.0, 0.0]
        single = simultaneous_band(dpath, [e], alpha=0.05, d=1, seed=5, **FAST_MC)[0]
        band = uniform_band(dpath, e, alpha=0.05, seed=5, **FAST_MC)
        for a, b in zip(single.intervals, band.intervals):
            self.assertAlmostEqual(a.half_width, b.half_width, places=12)
        W = [[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, -1.0, 0.0], [1.0, 0.0, 0.0, 2.0]]
        bands = simultaneous_band(dpath, W, alpha=0.05, d=1, references=[0.0, 0.0, 0.0], **FAST_MC)
        self.assertEqual(len(bands), 3)
        self.assertTrue(all(b.covered for b in bands))
        with self.assertRaises(ConfigError):
            simultaneous_band(dpath, [[1.0, 1.0, 1.0, 0.0]], d=1, **FAST_MC)
        self.assertEqual(len(simultaneous_band(dpath, [[1.0, 1.0, 1.0, 0.0]], d=2, **FAST_MC)), 1)


class TestWald(unittest.TestCase):
    def test_arithmetic(self):
        grid = TauGrid.single(0.5)
        dpath = synthetic_path(grid, [[0.0, 0.1, 0.0]], 1.0, 100, identity_precision(3))
        M, r = coefficient_hypothesis(3, {1: 0.0})
        result = wald_stat(dpath, M, r, 0.5)
        self.assertAlmostEqual(result.statistic, 4.0, places=10)
        self.assertAlmostEqual(result.critical_value.value, 3.8415, delta=1e-3)
        self.assertTrue(result.reject)
        self.assertAlmostEqual(result.p_value, stats.chi2.sf(4.0, 1), places=10)
        self.assertEqual(wald_stat(dpath, M, [0.1], 0.5).statistic, 0.0)

    def test_row_reparameterization(self):
        rng = np.random.default_rng(2)
        grid = TauGrid.single(0.3)
        A = rng.normal(size=(4, 4))
        Sigma = A @ A.T + np.eye(4)
        dpath = synthetic_path(grid, [rng.normal(size=4)], 1.7, 250, identity_precision(4, Sigma))
        M = rng.normal(size=(2, 4))
        r = rng.normal(size=2)
        B = np.array([[2.0, 1.0], [0.5, -3.0]])
        a = wald_stat(dpath, M, r, 0.3).statistic
        b = wald_stat(dpath, B @ M, B @ r, 0.3).statistic
        self.assertAlmostEqual(a, b, delta=1e-8 * max(1.0, a))

    def test_singular_sandwich(self):
        grid = TauGrid.single(0.5)
        dpath = synthetic_path(grid, [[0.0, 0.1, 0.2]], 1.0, 100, identity_precision(3))
        M = np.array([[0.0, 1.0, 0.0], [0.0, 2.0, 0.0]])
        with self.assertRaises(SingularSandwichError) as ctx:
            wald_stat(dpath, M, [0.0, 0.0], 0.5)
        self.assertEqual(len(ctx.exception.rows), 1)
        self.assertIn(ctx.exception.rows[0], (0, 1))

    def test_sup_wald(self):
        grid = TauGrid.span(0.3, 0.7, 0.1)
        rng = np.random.default_rng(3)
        dpath = synthetic_path(grid, rng.normal(scale=0.1, size=(len(grid), 3)), 1.0, 100, identity_precision(3))
        M, r = structural_hypothesis(3, 1, 2)
        result = sup_wald(dpath, M, r, alpha=0.05, **FAST_MC)
        for tau in grid.points:
            self.assertGreaterEqual(result.statistic, wald_stat(dpath, M, r, float(tau)).statistic - 1e-12)
        self.assertEqual(result.reject, result.statistic > result.critical_value.value)
        self.assertGreater(result.critical_value.value, chi2_quantile(1, 0.95))
        single = sup_wald(dpath, M, r, T=TauGrid.single(0.5), alpha=0.05, **FAST_MC)
        self.assertAlmostEqual(single.critical_value.value / 3.841, 1.0, delta=0.04)
        self.assertAlmostEqual(single.statistic, wald_stat(dpath, M, r, 0.5).statistic, places=12)

    def test_hypothesis_builders(self):
        M, r = structural_hypothesis(4, 3, 1)
        np.testing.assert_array_equal(M, [[0.0, -1.0, 0.0, 1.0]])
        M, r = dominance_hypothesis(4, [2, 1])
        np.testing.assert_array_equal(M, [[0, 1, 0, 0], [0, 0, 1, 0]])
        np.testing.assert_array_equal(r, [0.0, 0.0])
        with self.assertRaises(ConfigError):
            structural_hypothesis(4, 2, 2)
        with self.assertRaises(ConfigError):
            coefficient_hypothesis(4, {7: 0.0})


if __name__ == '__main__':
    unittest.main()
