import unittest
import sys
import os
import math

import numpy as np
from scipy.linalg import hadamard

# Add parent directory to path to import modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from infrastructure.errors import ConfigError, InfeasibleColumnError, PrecisionError
from infrastructure.schemas import Dataset
from precision.clime import (
    build_clime_lp, clime_column, default_tuning, estimate_precision,
    sample_covariance, symmetrize,
)
from tests.lp_oracle import enumerate_vertices


def hadamard_dataset(q, scales=None):
    X = hadamard(8)[:, :q].astype(float)
    if scales is not None:
        X = X * np.asarray(scales, dtype=float)
    return Dataset(Y=np.arange(8, dtype=float), X=X)


class TestSampleCovariance(unittest.TestCase):
    def test_intercept_entry_and_symmetry(self):
        rng = np.random.default_rng(0)
        data = Dataset.from_covariates(rng.normal(size=30), rng.normal(size=(30, 4)))
        S = sample_covariance(data)
        self.assertEqual(S[0, 0], 1.0)
        np.testing.assert_array_equal(S, S.T)
        np.testing.assert_allclose(S, data.X.T @ data.X / 30, atol=1e-14)

    def test_default_tuning(self):
        rng = np.random.default_rng(1)
        data = Dataset.from_covariates(rng.normal(size=400), rng.normal(size=(400, 500)))
        gamma, L = default_tuning(data)
        self.assertAlmostEqual(gamma, math.sqrt(math.log(500) / 400), places=12)
        self.assertAlmostEqual(L, 2.0 * math.sqrt(math.log(500)), places=12)
        self.assertAlmostEqual(gamma, 0.12465, places=4)
        with self.assertRaises(ConfigError):
            default_tuning(data, c2=0.0)


class TestClimeColumn(unittest.TestCase):
    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(2)
        compared = 0
        for _ in range(8):
            data = Dataset.from_covariates(rng.normal(size=5), rng.normal(size=(5, 2)))
            S = sample_covariance(data)
            gamma, L = 0.3, 3.0
            for j in range(3):
                problem = build_clime_lp(S, data.X, j, gamma, L)
                best, _ = enumerate_vertices(problem)
                if best is None:
                    with self.assertRaises(InfeasibleColumnError):
                        clime_column(S, data.X, j, gamma, L)
                    continue
                d = clime_column(S, data.X, j, gamma, L)
                self.assertAlmostEqual(float(np.abs(d).sum()), best, delta=1e-8)
                compared += 1
        self.assertGreater(compared, 5)

    def test_diagonal_covariance(self):
        data = hadamard_dataset(3, [1.0, 2.0, 0.5])
        S = sample_covariance(data)
        np.testing.assert_allclose(S, np.diag([1.0, 4.0, 0.25]), atol=1e-14)
        gamma = 0.05
        est = estimate_precision(data, gamma=gamma, L=100.0)
        expected = np.diag((1.0 - gamma) / np.array([1.0, 4.0, 0.25]))
        np.testing.assert_allclose(est.D_hat, expected, atol=1e-9)
        self.assertEqual(est.escalated_columns, [])

    def test_feasibility_of_every_column(self):
        rng = np.random.default_rng(3)
        data = Dataset.from_covariates(rng.normal(size=60), rng.normal(size=(60, 8)))
        est = estimate_precision(data)
        for rec in est.column_log:
            d = est.D_columns[:, rec.column]
            e = np.zeros(9)
            e[rec.column] = 1.0
            self.assertLessEqual(np.max(np.abs(est.Sigma_hat @ d - e)), rec.gamma + 1e-8)
            self.assertLessEqual(np.max(np.abs(data.X @ d)), rec.L + 1e-8)
            self.assertAlmostEqual(rec.l1_norm, float(np.abs(d).sum()), places=12)

    def test_gamma_is_offending_for_singular_covariance(self):
        with self.assertRaises(InfeasibleColumnError) as ctx:
            clime_column(np.ones((2, 2)), np.ones((3, 2)), 0, 0.01, 10.0)
        self.assertEqual(ctx.exception.offending, "gamma")

    def test_invalid_tuning(self):
        data = hadamard_dataset(2)
        with self.assertRaises(ConfigError):
            clime_column(sample_covariance(data), data.X, 0, -0.1, 1.0)


class TestEstimatePrecision(unittest.TestCase):
    def test_escalates_design_bound(self):
        data = hadamard_dataset(4)
        est = estimate_precision(data, gamma=0.1, L=0.1)
        # |X_i'd| >= ||d||_2 >= 0.9 under an orthonormal design, so L doubles four times
        for rec in est.column_log:
            self.assertEqual(rec.escalations, 4)
            self.assertAlmostEqual(rec.L, 1.6)
            self.assertAlmostEqual(rec.gamma, 0.1)
        self.assertAlmostEqual(est.L_n, 1.6)
        self.assertAlmostEqual(est.gamma_n, 0.1)
        self.assertEqual(est.escalated_columns, [0, 1, 2, 3])
        np.testing.assert_allclose(est.D_hat, 0.9 * np.eye(4), atol=1e-9)

    def test_gives_up_after_escalation_budget(self):
        data = hadamard_dataset(3)
        with self.assertRaises(PrecisionError):
            estimate_precision(data, gamma=0.1, L=0.1, max_escalations=2)

    def test_symmetrize(self):
        D = symmetrize(np.array([[1.0, 0.3], [-0.2, 1.0]]))
        self.assertEqual(D[0, 1], -0.2)
        self.assertEqual(D[1, 0], -0.2)
        tie = symmetrize(np.array([[1.0, 0.5], [-0.5, 1.0]]))
        self.assertEqual(tie[0, 1], 0.5)
        self.assertEqual(tie[1, 0], 0.5)

    def test_symmetric_output(self):
        rng = np.random.default_rng(4)
        data = Dataset.from_covariates(rng.normal(size=80), rng.normal(size=(80, 6)))
        est = estimate_precision(data)
        np.testing.assert_array_equal(est.D_hat, est.D_hat.T)

    def test_exchangeable_design(self):
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(25, 2))
        Z = np.vstack([Z, Z[:, ::-1]])
        data = Dataset.from_covariates(rng.normal(size=50), Z)
        est = estimate_precision(data, gamma=0.1, L=10.0)
        norms = {rec.column: rec.l1_norm for rec in est.column_log}
        self.assertAlmostEqual(norms[1], norms[2], delta=1e-8)

    def test_sandwich_close_to_inverse(self):
        rng = np.random.default_rng(6)
        data = Dataset.from_covariates(rng.normal(size=500), rng.normal(size=(500, 3)))
        gamma = 0.05
        est = estimate_precision(data, gamma=gamma, L=20.0)
        target = np.linalg.inv(est.Sigma_hat)
        self.assertLessEqual(np.max(np.abs(est.sandwich() - target)), 10 * gamma)

    def test_parallel_matches_serial(self):
        rng = np.random.default_rng(7)
        data = Dataset.from_covariates(rng.normal(size=40), rng.normal(size=(40, 5)))
        serial = estimate_precision(data)
        pooled = estimate_precision(data, workers=2)
        np.testing.assert_array_equal(serial.D_hat, pooled.D_hat)
        self.assertEqual(serial.to_dict(), pooled.to_dict())


if __name__ == '__main__':
    unittest.main()
