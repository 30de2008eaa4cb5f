# -*- coding: utf-8 -*-
# l1-penalized and oracle quantile regression solved exactly as LPs.
import logging
import math
from functools import partial
from typing import Optional, Sequence, Tuple

import numpy as np

from infrastructure.errors import ConfigError, DataFormatError, SolverError
from infrastructure.parallel import run_parallel
from infrastructure.schemas import Dataset, QuantileFit, QuantilePath, TauGrid
from lp_core.bounded_simplex import Basis, LpProblem, solve_bounded_lp, OPTIMAL
from quantile_fit.check_loss import mean_check_loss, snap_residuals

logger = logging.getLogger(__name__)

LAMBDA0_CONSTANT = 2.0


def default_lambda0(n: int, p: int) -> float:
    """c1 * sqrt(log(p) / n) with c1 = 2."""
    return LAMBDA0_CONSTANT * math.sqrt(math.log(max(p, 1)) / n)


def default_penalties(data: Dataset, tau: float, lambda0: float) -> np.ndarray:
    """
    lambda_j = lambda0 * sqrt(tau (1 - tau)) * sigma_j for j >= 1, with
    sigma_j^2 = mean of x_ij^2; the intercept is never penalized.
    """
    if lambda0 < 0:
        raise ConfigError(f"lambda0 must be nonnegative, got {lambda0}")
    sigma = np.sqrt(np.mean(data.X ** 2, axis=0))
    if np.any(sigma[1:] == 0.0):
        raise DataFormatError(f"zero-scale columns: {np.flatnonzero(sigma[1:] == 0.0) + 1}")
    penalties = lambda0 * math.sqrt(tau * (1.0 - tau)) * sigma
    penalties[0] = 0.0
    return penalties


def build_quantile_lp(data: Dataset, tau: float, penalties: np.ndarray,
                      columns: Optional[Sequence[int]] = None) -> Tuple[LpProblem, np.ndarray]:
    """
    Splitting form  min lam'(b+ + b-) + n^-1 (tau 1'u+ + (1-tau) 1'u-)
    s.t. X_C (b+ - b-) + u+ - u- = Y, all variables >= 0.
    Columns with infinite penalty are pinned at zero.
    """
    n = data.n
    cols = np.arange(data.X.shape[1]) if columns is None else np.asarray(columns, dtype=int)
    lam = np.asarray(penalties, dtype=float)[cols]
    k = cols.shape[0]
    XC = data.X[:, cols]
    eye = np.eye(n)
    A = np.hstack([XC, -XC, eye, -eye])
    finite = np.isfinite(lam)
    lam_cost = np.where(finite, lam, 0.0)
    cost = np.concatenate([lam_cost, lam_cost, np.full(n, tau / n), np.full(n, (1.0 - tau) / n)])
    upper = np.full(2 * k + 2 * n, np.inf)
    upper[:k][~finite] = 0.0
    upper[k:2 * k][~finite] = 0.0
    problem = LpProblem("min", cost, A, ["="] * n, data.Y, np.zeros(2 * k + 2 * n), upper)
    return problem, cols


def penalized_objective(residuals: np.ndarray, beta: np.ndarray, tau: float,
                        penalties: np.ndarray) -> float:
    lam = np.asarray(penalties, dtype=float)
    active = np.isfinite(lam)
    return mean_check_loss(residuals, tau) + float(np.sum(lam[active] * np.abs(beta[active])))


def _solve(data: Dataset, tau: float, penalties: np.ndarray, columns, warm_start: Optional[Basis],
           support) -> QuantileFit:
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    problem, cols = build_quantile_lp(data, tau, penalties, columns)
    sol = solve_bounded_lp(problem, warm_start=warm_start)
    if sol.status != OPTIMAL:
        raise SolverError(f"quantile LP at tau={tau} finished with status {sol.status}", sol.status)
    k = cols.shape[0]
    beta = np.zeros(data.X.shape[1])
    beta[cols] = sol.x[:k] - sol.x[k:2 * k]
    residuals = snap_residuals(data.Y - data.X @ beta)
    return QuantileFit(
        tau=float(tau), beta=beta, residuals=residuals,
        objective=penalized_objective(residuals, beta, tau, penalties),
        penalties=np.asarray(penalties, dtype=float), lp_status=sol.status,
        row_duals=sol.row_duals, support=support, iterations=sol.iterations, basis=sol.basis,
    )


def fit_penalized(data: Dataset, tau: float, penalties: np.ndarray,
                  warm_start: Optional[Basis] = None) -> QuantileFit:
    """
    Exact minimizer of n^-1 sum rho_tau(Y_i - X_i'b) + sum_j lambda_j |b_j|.

    Args:
        data: dataset with intercept column.
        tau: quantile level in (0, 1).
        penalties: (p+1)-vector, nonnegative; +inf pins a coefficient at 0.
        warm_start: basis of a previous fit on the same data.
    """
    penalties = np.asarray(penalties, dtype=float)
    if penalties.shape != (data.X.shape[1],):
        raise ConfigError(f"expected {data.X.shape[1]} penalties, got {penalties.shape}")
    if np.any(penalties < 0) or np.any(np.isnan(penalties)):
        raise ConfigError("penalties must be nonnegative")
    return _solve(data, tau, penalties, None, warm_start, None)


def _fit_cold(data: Dataset, lambda0: float, tau: float) -> QuantileFit:
    return fit_penalized(data, tau, default_penalties(data, tau, lambda0))


def fit_path(data: Dataset, grid: TauGrid, lambda0: Optional[float] = None,
             warm_start: bool = True, workers: int = 1) -> QuantilePath:
    """
    One penalized fit per grid point. Warm-started sweeps go left to right;
    cold sweeps may run in parallel.
    """
    if lambda0 is None:
        lambda0 = default_lambda0(data.n, data.p)
    if not warm_start:
        fits = run_parallel(partial(_fit_cold, data, lambda0), [float(t) for t in grid.points], workers)
        return QuantilePath(grid=grid, fits=fits)

    fits = []
    basis = None
    for tau in grid.points:
        fit = fit_penalized(data, float(tau), default_penalties(data, float(tau), lambda0), warm_start=basis)
        basis = fit.basis
        fits.append(fit)
    logger.debug(f"fit_path: {len(fits)} grid points, {sum(f.iterations for f in fits)} simplex iterations")
    return QuantilePath(grid=grid, fits=fits)


def check_support(data: Dataset, support: Sequence[int]) -> Tuple[int, ...]:
    support = tuple(sorted(set(int(j) for j in support)))
    if 0 not in support:
        raise ConfigError("oracle support must contain the intercept (index 0)")
    if support[-1] > data.p or support[0] < 0:
        raise ConfigError(f"oracle support indices must lie in [0, {data.p}]")
    if len(support) >= data.n:
        raise ConfigError(f"oracle support size {len(support)} must be below n={data.n}")
    if np.linalg.matrix_rank(data.X[:, list(support)]) < len(support):
        raise DataFormatError(f"oracle support columns {list(support)} are collinear")
    return support


def fit_oracle(data: Dataset, support: Sequence[int], tau: float,
               warm_start: Optional[Basis] = None) -> QuantileFit:
    """Unpenalized quantile regression on the columns in ``support``."""
    support = check_support(data, support)
    penalties = np.zeros(data.X.shape[1])
    return _solve(data, tau, penalties, list(support), warm_start, support)


def quotient_sparsity(path: QuantilePath, tau: float, h: float) -> float:
    """
    Difference quotient (Q(tau + h) - Q(tau - h)) / 2h of the intercept path,
    a cross-check for the rank-based sparsity estimators.
    """
    grid = path.grid
    if not (grid.contains(tau + h) and grid.contains(tau - h)):
        raise ConfigError("tau +- h must be grid points")
    upper = path.fit_at(tau + h).beta[0]
    lower = path.fit_at(tau - h).beta[0]
    return float((upper - lower) / (2.0 * h))
