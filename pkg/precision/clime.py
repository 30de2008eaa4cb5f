# -*- coding: utf-8 -*-
# Sample covariance and the column-wise constrained l1 precision program.
import logging
import math
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from infrastructure.errors import ConfigError, InfeasibleColumnError, PrecisionError, SolverError
from infrastructure.parallel import run_parallel
from infrastructure.schemas import ColumnRecord, Dataset, PrecisionEstimate
from lp_core.bounded_simplex import LpProblem, solve_bounded_lp, OPTIMAL, INFEASIBLE

logger = logging.getLogger(__name__)

MAX_ESCALATIONS = 6
GAMMA_CONSTANT = 1.0
L_CONSTANT = 2.0


def sample_covariance(data: Dataset) -> np.ndarray:
    """Sigma_hat = n^-1 sum X_i X_i' (intercept included, so entry (0,0) is 1)."""
    S = data.X.T @ data.X / data.n
    return 0.5 * (S + S.T)


def default_tuning(data: Dataset, c2: float = GAMMA_CONSTANT, c3: float = L_CONSTANT) -> Tuple[float, float]:
    """gamma_n = c2 sqrt(log(p v n) / n) and L_n = c3 sqrt(log(p v n))."""
    if c2 <= 0 or c3 <= 0:
        raise ConfigError("tuning constants must be positive")
    log_pn = math.log(max(data.p, data.n))
    return c2 * math.sqrt(log_pn / data.n), c3 * math.sqrt(log_pn)


def build_clime_lp(Sigma_hat: np.ndarray, X: np.ndarray, j: int, gamma: float, L: float,
                   rows: Optional[Sequence[int]] = None) -> LpProblem:
    """
    min 1'(d+ + d-) s.t. Sigma (d+ - d-) - r = e_j, X_R (d+ - d-) - t = 0,
    with r in [-gamma, gamma], t in [-L, L] and d+- >= 0.

    ``rows`` selects the design rows carrying the |X_i'd| <= L bound (all by default).
    """
    q = Sigma_hat.shape[0]
    XR = X if rows is None else X[np.asarray(rows, dtype=int)]
    k = XR.shape[0]
    top = np.hstack([Sigma_hat, -Sigma_hat, -np.eye(q), np.zeros((q, k))])
    bottom = np.hstack([XR, -XR, np.zeros((k, q)), -np.eye(k)])
    A = np.vstack([top, bottom])
    rhs = np.zeros(q + k)
    rhs[j] = 1.0
    cost = np.concatenate([np.ones(2 * q), np.zeros(q + k)])
    lower = np.concatenate([np.zeros(2 * q), np.full(q, -gamma), np.full(k, -L)])
    upper = np.concatenate([np.full(2 * q, np.inf), np.full(q, gamma), np.full(k, L)])
    return LpProblem("min", cost, A, ["="] * (q + k), rhs, lower, upper)


def _solve_column(Sigma_hat: np.ndarray, X: np.ndarray, j: int, gamma: float,
                  L: float) -> Tuple[np.ndarray, List[int]]:
    # Design-row bounds are added lazily: most of them are slack at the optimum.
    q = Sigma_hat.shape[0]
    rows: List[int] = []
    sol = solve_bounded_lp(build_clime_lp(Sigma_hat, X, j, gamma, L, rows))
    if sol.status == INFEASIBLE:
        raise InfeasibleColumnError(j, "gamma")
    while True:
        if sol.status != OPTIMAL:
            raise SolverError(f"precision column {j} finished with status {sol.status}", sol.status)
        d = sol.x[:q] - sol.x[q:2 * q]
        proj = np.abs(X @ d)
        violated = np.flatnonzero(proj > L + 1e-9 * max(1.0, L))
        if violated.size == 0:
            return d, rows
        rows = sorted(set(rows).union(int(i) for i in violated))
        sol = solve_bounded_lp(build_clime_lp(Sigma_hat, X, j, gamma, L, rows))
        if sol.status == INFEASIBLE:
            raise InfeasibleColumnError(j, "L")


def clime_column(Sigma_hat: np.ndarray, X: np.ndarray, j: int, gamma: float, L: float) -> np.ndarray:
    """
    Solves min ||d||_1 s.t. ||Sigma_hat d - e_j||_inf <= gamma, |X_i'd| <= L for all i.

    Raises:
        InfeasibleColumnError: naming the parameter to relax.
    """
    if gamma <= 0 or L <= 0:
        raise ConfigError("gamma and L must be positive")
    d, _ = _solve_column(Sigma_hat, X, j, gamma, L)
    return d


def _escalated_column(Sigma_hat: np.ndarray, X: np.ndarray, gamma: float, L: float,
                      max_escalations: int, j: int) -> Tuple[np.ndarray, ColumnRecord]:
    escalations = 0
    while True:
        try:
            d, rows = _solve_column(Sigma_hat, X, j, gamma, L)
            break
        except InfeasibleColumnError as err:
            if escalations >= max_escalations:
                raise PrecisionError(
                    f"precision column {j} still infeasible after {max_escalations} escalations "
                    f"(gamma={gamma:.6g}, L={L:.6g})", "Infeasible")
            if err.offending == "gamma":
                gamma *= 2.0
            else:
                L *= 2.0
            escalations += 1
    record = ColumnRecord(column=j, gamma=gamma, L=L, escalations=escalations,
                          l1_norm=float(np.abs(d).sum()), design_rows_used=len(rows))
    return d, record


def symmetrize(D_columns: np.ndarray) -> np.ndarray:
    """
    Keeps, for each pair (i, j), the entry of smaller magnitude among
    D[i, j] and D[j, i]; ties keep D[i, j] for i < j.
    """
    q = D_columns.shape[0]
    D = D_columns.copy()
    iu = np.triu_indices(q, 1)
    upper = D_columns[iu]
    lower = D_columns[(iu[1], iu[0])]
    keep = np.where(np.abs(upper) <= np.abs(lower), upper, lower)
    D[iu] = keep
    D[(iu[1], iu[0])] = keep
    return D


def estimate_precision(data: Dataset, gamma: Optional[float] = None, L: Optional[float] = None,
                       c2: float = GAMMA_CONSTANT, c3: float = L_CONSTANT, workers: int = 1,
                       max_escalations: int = MAX_ESCALATIONS) -> PrecisionEstimate:
    """
    Solves every column program, escalating gamma or L by doubling when a
    column is infeasible, and symmetrizes the result.

    Args:
        data: dataset with intercept column.
        gamma: covariance band; default_tuning when omitted.
        L: design-projection bound; default_tuning when omitted.
        c2, c3: constants for default_tuning.
        workers: process pool size for the column programs.
        max_escalations: per-column doubling budget.
    """
    g0, l0 = default_tuning(data, c2, c3)
    gamma = g0 if gamma is None else float(gamma)
    L = l0 if L is None else float(L)
    if gamma <= 0 or L <= 0:
        raise ConfigError("gamma and L must be positive")

    Sigma_hat = sample_covariance(data)
    q = Sigma_hat.shape[0]
    results = run_parallel(partial(_escalated_column, Sigma_hat, data.X, gamma, L, max_escalations),
                           range(q), workers)
    D_columns = np.column_stack([d for d, _ in results])
    log = [rec for _, rec in results]
    for rec in log:
        if rec.escalations:
            logger.warning(f"precision column {rec.column}: {rec.escalations} escalation(s), "
                           f"final gamma={rec.gamma:.6g}, L={rec.L:.6g}")
    return PrecisionEstimate(
        D_hat=symmetrize(D_columns),
        gamma_n=max(rec.gamma for rec in log),
        L_n=max(rec.L for rec in log),
        column_log=log,
        Sigma_hat=Sigma_hat,
        D_columns=D_columns,
    )
