# -*- coding: utf-8 -*-
# Wald and sup-Wald tests of linear hypotheses M beta(tau) = r.
import logging
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import linalg

from infrastructure.errors import ConfigError, SingularSandwichError
from infrastructure.schemas import CriticalValue, DebiasedPath, PrecisionEstimate, TauGrid, TestResult
from inference.critical_values import (
    DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_STEPS, chi2_critical_value, chi2_sf,
    mc_tail_probability, simulate_bridge_sups,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


def _hypothesis(dpath: DebiasedPath, M, r) -> Tuple[np.ndarray, np.ndarray]:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    q = dpath.beta_check.shape[1]
    if M.shape[1] != q:
        raise ConfigError(f"M has {M.shape[1]} columns, expected {q}")
    if r.shape != (M.shape[0],):
        raise ConfigError(f"r has length {r.shape[0]}, expected {M.shape[0]}")
    return M, r


def _check_invertible(V: np.ndarray):
    _, R, piv = linalg.qr(V, pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size else 0.0
    rank = int(np.sum(diag > RANK_TOL * scale)) if scale > 0 else 0
    if rank < V.shape[0]:
        rows = sorted(int(i) for i in piv[rank:])
        raise SingularSandwichError(f"Wald sandwich is singular (rank {rank} of {V.shape[0]}); "
                                    f"dependent rows of M: {rows}", rows)


def wald_statistic(dpath: DebiasedPath, M: np.ndarray, r: np.ndarray, tau: float,
                   S: np.ndarray) -> float:
    beta, sparsity = dpath.at(tau)
    diff = M @ beta - r
    V = tau * (1.0 - tau) * sparsity ** 2 * (M @ S @ M.T)
    V = 0.5 * (V + V.T)
    _check_invertible(V)
    return float(dpath.n * diff @ np.linalg.solve(V, diff))


def wald_stat(dpath: DebiasedPath, M, r, tau: float, D: Optional[PrecisionEstimate] = None,
              alpha: float = 0.05) -> TestResult:
    """
    W_n(tau) = n (M b - r)' [tau (1 - tau) M D_tau Sigma D_tau' M']^-1 (M b - r)
    at the debiased b = beta_check(tau), D_tau = sparsity(tau) D, against chi2_d.

    Raises:
        SingularSandwichError: naming the linearly dependent rows of M.
    """
    D = D or dpath.precision
    M, r = _hypothesis(dpath, M, r)
    stat = wald_statistic(dpath, M, r, tau, D.sandwich())
    crit = chi2_critical_value(M.shape[0], alpha)
    return TestResult(statistic=stat, critical_value=crit, p_value=chi2_sf(M.shape[0], stat),
                      reject=stat > crit.value, taus=[float(tau)], M=M, r=r, per_tau=[stat])


def sup_wald(dpath: DebiasedPath, M, r, T: Optional[TauGrid] = None, D: Optional[PrecisionEstimate] = None,
             alpha: float = 0.05, seed: int = DEFAULT_SEED, n_paths: int = DEFAULT_PATHS,
             n_steps: int = DEFAULT_STEPS, workers: int = 1) -> TestResult:
    """
    max_T W_n(tau) against the Monte Carlo law of sup_T ||B_d(t)||^2 / (t (1 - t))
    simulated on the same grid; the p-value is the simulated tail fraction.
    """
    D = D or dpath.precision
    M, r = _hypothesis(dpath, M, r)
    T = dpath.grid if T is None else T
    S = D.sandwich()
    per_tau = []
    for tau in T.points:
        if not dpath.grid.contains(tau):
            raise ConfigError(f"sup-Wald point tau={tau} is not on the debiased grid")
        per_tau.append(wald_statistic(dpath, M, r, float(tau), S))
    stat = max(per_tau)
    d = M.shape[0]
    sups = simulate_bridge_sups(d, T, seed, n_paths, n_steps, functional="qd2", workers=workers)
    crit = CriticalValue(kind="BesselSup", alpha=float(alpha), value=float(np.quantile(sups, 1.0 - alpha)),
                         metadata={"d": d, "functional": "qd2", "seed": int(seed), "n_paths": int(n_paths),
                                   "n_steps": int(n_steps), "grid": [T.lo, T.hi, T.step]})
    return TestResult(statistic=stat, critical_value=crit, p_value=mc_tail_probability(stat, sups),
                      reject=stat > crit.value, taus=[float(t) for t in T.points], M=M, r=r,
                      per_tau=per_tau)


def coefficient_hypothesis(q: int, values: Dict[int, float]) -> Tuple[np.ndarray, np.ndarray]:
    """Rows e_j' with r_j = value, one per (j, value) pair in index order."""
    if not values:
        raise ConfigError("no coefficients given")
    items = sorted(values.items())
    M = np.zeros((len(items), q))
    for row, (j, _) in enumerate(items):
        if not 0 <= j < q:
            raise ConfigError(f"coefficient index {j} outside [0, {q - 1}]")
        M[row, j] = 1.0
    return M, np.array([v for _, v in items], dtype=float)


def structural_hypothesis(q: int, k: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """beta_k(tau) = beta_j(tau): M = e_k - e_j, r = 0."""
    if k == j or not (0 <= k < q and 0 <= j < q):
        raise ConfigError(f"structural hypothesis needs two distinct indices in [0, {q - 1}]")
    M = np.zeros((1, q))
    M[0, k], M[0, j] = 1.0, -1.0
    return M, np.zeros(1)


def dominance_hypothesis(q: int, columns: Iterable[int]) -> Tuple[np.ndarray, np.ndarray]:
    """beta_j(tau) = 0 for every listed j: the conditional quantiles do not move with them."""
    return coefficient_hypothesis(q, {int(j): 0.0 for j in columns})
