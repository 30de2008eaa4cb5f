# -*- coding: utf-8 -*-
# Regression rank scores (the dual of the quantile LP) and the scale rank statistic.
import logging
from typing import Optional, Sequence

import numpy as np

from infrastructure.errors import ConfigError, SolverError
from infrastructure.schemas import Dataset, QuantileFit, RankScores, ScalePath, TauGrid
from lp_core.bounded_simplex import Basis, LpProblem, solve_bounded_lp, OPTIMAL
from quantile_fit.penalized_fit import (
    check_support, default_lambda0, default_penalties, fit_oracle, fit_penalized,
)

logger = logging.getLogger(__name__)

PENALIZED = "Penalized"
ORACLE = "Oracle"
METHODS = ("auto", "dual", "primal")


def _dual_bounds(data: Dataset, lambda_n) -> np.ndarray:
    q = data.X.shape[1]
    lam = np.asarray(lambda_n, dtype=float)
    if lam.ndim == 0:
        lam = np.full(q, float(lam))
    if lam.shape != (q,):
        raise ConfigError(f"expected a scalar or {q} dual bounds, got shape {lam.shape}")
    if np.any(lam < 0) or np.any(np.isnan(lam)):
        raise ConfigError("dual bounds must be nonnegative")
    return lam


def build_rank_score_lp(data: Dataset, tau: float, lambda_n=None,
                        support: Optional[Sequence[int]] = None) -> LpProblem:
    """
    max Y'xi over xi in [0,1]^n subject to, for every constrained column k,
        X_k'xi - t_k = (1 - tau) X_k'1,  t_k in [-lambda_k, lambda_k].

    With ``support`` the rows are the oracle equalities on those columns only.
    Columns with lambda_k = 0 get a plain equality row; lambda_k = inf drops the row.
    """
    n = data.n
    target = (1.0 - tau) * data.X.sum(axis=0)
    if support is not None:
        cols = list(support)
        A = data.X[:, cols].T
        return LpProblem("max", data.Y.copy(), A, ["="] * len(cols), target[cols],
                         np.zeros(n), np.ones(n))

    lam = _dual_bounds(data, lambda_n)
    cols = np.flatnonzero(np.isfinite(lam))
    slack_cols = [k for k in cols if lam[k] > 0]
    m, s = cols.shape[0], len(slack_cols)
    A = np.zeros((m, n + s))
    A[:, :n] = data.X[:, cols].T
    row_of = {int(k): r for r, k in enumerate(cols)}
    for c, k in enumerate(slack_cols):
        A[row_of[int(k)], n + c] = -1.0
    bound = lam[slack_cols]
    cost = np.concatenate([data.Y, np.zeros(s)])
    lower = np.concatenate([np.zeros(n), -bound])
    upper = np.concatenate([np.ones(n), bound])
    return LpProblem("max", cost, A, ["="] * m, target[cols], lower, upper)


def _scores(data: Dataset, tau: float, problem: LpProblem, warm_start: Optional[Basis]):
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    sol = solve_bounded_lp(problem, warm_start=warm_start)
    if sol.status != OPTIMAL:
        raise SolverError(f"rank-score LP at tau={tau} finished with status {sol.status}", sol.status)
    xi = np.clip(sol.x[:data.n], 0.0, 1.0)
    # dual value: n^-1 Y'(xi - (1 - tau)), equal to the primal penalized objective
    objective = float(data.Y @ (xi - (1.0 - tau)) / data.n)
    return xi, objective, sol


def rank_scores_penalized(data: Dataset, tau: float, lambda_n,
                          warm_start: Optional[Basis] = None) -> RankScores:
    """
    Penalized regression rank scores.

    Args:
        data: dataset with intercept column.
        tau: quantile level in (0, 1).
        lambda_n: bound on |X_k'xi - (1 - tau) X_k'1|, scalar or one per column.
            The primal pair of a fit with penalties lambda_j uses n * lambda_j.
        warm_start: basis of the previous grid point.
    """
    lam = _dual_bounds(data, lambda_n)
    xi, objective, sol = _scores(data, tau, build_rank_score_lp(data, tau, lam), warm_start)
    return RankScores(tau=float(tau), xi=xi, lambda_n=lam, kind=PENALIZED, objective=objective,
                      lp_status=sol.status, basis=sol.basis)


def rank_scores_oracle(data: Dataset, support: Sequence[int], tau: float,
                       warm_start: Optional[Basis] = None) -> RankScores:
    """Rank scores with X_S'xi = (1 - tau) X_S'1 imposed exactly."""
    support = check_support(data, support)
    problem = build_rank_score_lp(data, tau, support=support)
    xi, objective, sol = _scores(data, tau, problem, warm_start)
    return RankScores(tau=float(tau), xi=xi, lambda_n=np.zeros(len(support)), kind=ORACLE,
                      objective=objective, support=support, lp_status=sol.status, basis=sol.basis)


def rank_scores_from_fit(fit: QuantileFit) -> RankScores:
    """Rank scores recovered from the row duals of a primal fit: xi = n y + (1 - tau)."""
    if fit.row_duals is None:
        raise ConfigError("fit carries no row duals")
    n = fit.residuals.shape[0]
    xi = np.clip(fit.subgradient + (1.0 - fit.tau), 0.0, 1.0)
    kind = ORACLE if fit.support is not None else PENALIZED
    lam = np.zeros(len(fit.support)) if fit.support is not None else n * fit.penalties
    return RankScores(tau=fit.tau, xi=xi, lambda_n=lam, kind=kind, objective=fit.objective,
                      support=fit.support, lp_status=fit.lp_status)


def phi(t) -> np.ndarray:
    """Scaled score function sign(t - 1/2) with phi(1/2) = +1."""
    return np.where(np.asarray(t, dtype=float) >= 0.5, 1.0, -1.0)


def scale_path_from_scores(data: Dataset, grid: TauGrid, xi_path: np.ndarray,
                           kind: str = PENALIZED, method: str = "dual") -> ScalePath:
    """
    S_n(tau_m) = -n^-1 sum_i Y_i sum_{k<m} phi(mid_k) (xi_i(tau_{k+1}) - xi_i(tau_k)),
    anchored at zero on the left grid edge, together with its unwound path T_n.
    """
    xi_path = np.atleast_2d(xi_path)
    # -n^-1 Y'(xi_{k+1} - xi_k) is the increment of T_n
    t_steps = -(np.diff(xi_path, axis=0) @ data.Y) / data.n
    mids = 0.5 * (grid.points[1:] + grid.points[:-1])
    s_steps = phi(mids) * t_steps
    S = np.concatenate([[0.0], np.cumsum(s_steps)])
    T = np.concatenate([[0.0], np.cumsum(t_steps)])
    return ScalePath(grid=grid, S_values=S, xi_path=xi_path, unwound=T, kind=kind, method=method)


def scale_path_from_values(grid: TauGrid, S_values: Sequence[float]) -> ScalePath:
    """ScalePath for a given S_n path; the unwound path follows from its increments."""
    S = np.asarray(S_values, dtype=float)
    if S.shape != (len(grid),):
        raise ConfigError("need one S value per grid point")
    mids = 0.5 * (grid.points[1:] + grid.points[:-1])
    T = np.concatenate([[0.0], np.cumsum(phi(mids) * np.diff(S))])
    return ScalePath(grid=grid, S_values=S, xi_path=np.zeros((len(grid), 0)), unwound=T,
                     kind=PENALIZED, method="given")


def _pick_method(data: Dataset, method: str, support) -> str:
    if method not in METHODS:
        raise ConfigError(f"unknown scale-path method {method!r}; choose from {METHODS}")
    if method != "auto":
        return method
    if support is not None:
        return "dual"
    return "dual" if data.X.shape[1] < data.n else "primal"


def scale_statistic_path(data: Dataset, grid: TauGrid, lambda0: Optional[float] = None,
                         method: str = "auto", support: Optional[Sequence[int]] = None) -> ScalePath:
    """
    Sweeps the grid left to right with warm starts and integrates the rank
    scores into S_n.

    Args:
        data: dataset with intercept column.
        grid: fine grid containing 1/2.
        lambda0: penalty level; the dual bounds are n * default_penalties.
        method: "dual" solves the rank-score LP, "primal" reads the scores off
            the row duals of the quantile LP, "auto" takes the smaller LP.
        support: oracle support; switches to oracle rank scores.
    """
    if not grid.contains(0.5):
        raise ConfigError("scale-statistic grid must contain 0.5")
    if len(grid) < 2:
        raise ConfigError("scale-statistic grid needs at least two points")
    if support is not None:
        support = check_support(data, support)
    if lambda0 is None:
        lambda0 = default_lambda0(data.n, data.p)
    chosen = _pick_method(data, method, support)

    rows = []
    basis = None
    for tau in grid.points:
        tau = float(tau)
        if chosen == "dual":
            if support is not None:
                scores = rank_scores_oracle(data, support, tau, warm_start=basis)
            else:
                lam = data.n * default_penalties(data, tau, lambda0)
                scores = rank_scores_penalized(data, tau, lam, warm_start=basis)
            basis = scores.basis
        else:
            if support is not None:
                fit = fit_oracle(data, support, tau, warm_start=basis)
            else:
                fit = fit_penalized(data, tau, default_penalties(data, tau, lambda0), warm_start=basis)
            basis = fit.basis
            scores = rank_scores_from_fit(fit)
        rows.append(scores.xi)
    kind = ORACLE if support is not None else PENALIZED
    logger.debug(f"scale path: {len(grid)} points, method={chosen}, kind={kind}")
    return scale_path_from_scores(data, grid, np.vstack(rows), kind=kind, method=chosen)


def rank_score_gap(scores: RankScores, errors: np.ndarray, quantile: float) -> float:
    """
    n^-1 sum_i |u_i - q| |xi_i - 1{u_i >= q}| for known errors u and
    population quantile q = F^-1(tau).
    """
    u = np.asarray(errors, dtype=float)
    ideal = (u >= quantile).astype(float)
    return float(np.mean(np.abs(u - quantile) * np.abs(scores.xi - ideal)))
