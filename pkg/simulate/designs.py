# -*- coding: utf-8 -*-
# Gaussian designs, sparse coefficient vectors and error laws of the simulation study.
import logging
import math
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from infrastructure.errors import ConfigError
from infrastructure.schemas import Dataset, SimConfig
from rank_scores.sparsity import known_quantile, known_sparsity

logger = logging.getLogger(__name__)

EQUICORRELATION = "equicorrelation"
TOEPLITZ = "toeplitz"
SUPPORT_SIZE = 10
COEFFICIENT_DECAY = 18.0


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@lru_cache(maxsize=8)
def _toeplitz_factor(p: int, rho: float) -> np.ndarray:
    return linalg.cholesky(linalg.toeplitz(rho ** np.arange(p)), lower=True)


def population_covariance(p: int, covariance: str, rho: float) -> np.ndarray:
    """(1 - rho) I + rho 11' or rho^|a - b|, without the intercept."""
    if covariance == EQUICORRELATION:
        return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))
    if covariance == TOEPLITZ:
        return linalg.toeplitz(rho ** np.arange(p))
    raise ConfigError(f"unknown covariance {covariance!r}")


def gen_design(n: int, p: int, covariance: str = EQUICORRELATION, rho: float = 0.5,
               seed=None) -> np.ndarray:
    """
    n x (p + 1) design with the intercept in column 0 and N(0, Sigma) rows.

    Equicorrelation rows are drawn from the one-factor form
    sqrt(rho) Z0 1 + sqrt(1 - rho) Z; Toeplitz rows through the Cholesky
    factor of rho^|a - b|.
    """
    rng = _rng(seed)
    if covariance == EQUICORRELATION:
        if not 0.0 <= rho < 1.0:
            raise ConfigError(f"equicorrelation needs 0 <= rho < 1, got {rho}")
        shared = rng.standard_normal((n, 1))
        Z = math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * rng.standard_normal((n, p))
    elif covariance == TOEPLITZ:
        if not -1.0 < rho < 1.0:
            raise ConfigError(f"toeplitz needs |rho| < 1, got {rho}")
        Z = rng.standard_normal((n, p)) @ _toeplitz_factor(int(p), float(rho)).T
    else:
        raise ConfigError(f"unknown covariance {covariance!r}")
    return np.hstack([np.ones((n, 1)), Z])


def default_beta(p: int, s: int = SUPPORT_SIZE) -> np.ndarray:
    """beta_0 = 0, beta_j = 1 - (j - 1)/18 for j = 1..min(s, p), zero beyond."""
    if p < 1 or s < 1:
        raise ConfigError(f"need p >= 1 and s >= 1, got p={p}, s={s}")
    if p < s:
        logger.warning(f"p={p} < s={s}: using a support of size {p}")
        s = p
    beta = np.zeros(p + 1)
    beta[1:s + 1] = 1.0 - np.arange(s) / COEFFICIENT_DECAY
    return beta


def check_error_law(error: str) -> str:
    key = error.strip().lower()
    if key == "zero":
        return key
    known_quantile(key)
    return key


def gen_errors(n: int, error: str, seed=None) -> np.ndarray:
    """i.i.d. errors with median zero; t1 is the ratio of two independent normals."""
    rng = _rng(seed)
    key = check_error_law(error)
    if key == "zero":
        return np.zeros(n)
    if key in ("normal", "gaussian"):
        return rng.standard_normal(n)
    if key in ("t1", "cauchy"):
        return rng.standard_normal(n) / rng.standard_normal(n)
    if key == "uniform":
        return rng.uniform(-0.5, 0.5, size=n)
    return rng.standard_t(float(key[1:]), size=n)


def gen_response(X: np.ndarray, beta_star: np.ndarray, error: str = "normal",
                 seed=None) -> Tuple[np.ndarray, np.ndarray]:
    """Y = X beta* + u; returns (Y, u)."""
    u = gen_errors(X.shape[0], error, seed)
    return X @ beta_star + u, u


def error_quantile(error: str, tau: float) -> float:
    key = check_error_law(error)
    if key == "zero":
        return 0.0
    return known_quantile(key)(tau)


def error_sparsity(error: str) -> Optional[Callable[[float], float]]:
    """Closed-form sparsity function of the law, None for the degenerate zero law."""
    key = check_error_law(error)
    if key == "zero":
        return None
    return known_sparsity(key)


def true_beta(beta_star: np.ndarray, tau: float, error: str) -> np.ndarray:
    """beta*(tau) = beta* + e_0 F^-1(tau); slopes do not move with tau."""
    beta = np.array(beta_star, dtype=float)
    beta[0] += error_quantile(error, tau)
    return beta


def simulate_dataset(config: SimConfig, seed=None,
                     beta_star: Optional[np.ndarray] = None) -> Tuple[Dataset, np.ndarray, np.ndarray]:
    """
    One draw of the configured setting.

    Returns:
        (Dataset, beta_star, errors u)
    """
    rng = _rng(seed)
    beta = default_beta(config.p, config.s) if beta_star is None else np.asarray(beta_star, dtype=float)
    X = gen_design(config.n, config.p, config.covariance, config.rho, rng)
    Y, u = gen_response(X, beta, config.error, rng)
    return Dataset(Y=Y, X=X), beta, u
