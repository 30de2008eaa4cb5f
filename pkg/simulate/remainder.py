# -*- coding: utf-8 -*-
# Known-truth diagnostic: the remainder after the leading linear term of the debiased path.
import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np

from infrastructure.schemas import (
    DebiasedPath, Dataset, PrecisionEstimate, RemainderDiagnostic, RemainderRow, SimConfig, TauGrid,
)
from inference.debias import ESTIMATED, KNOWN, debias_path
from inference.pipeline import select_bandwidth, support_size
from precision.clime import estimate_precision
from quantile_fit.check_loss import score
from quantile_fit.penalized_fit import fit_path
from rank_scores.rank_scores import rank_score_gap, rank_scores_oracle, scale_statistic_path
from simulate.designs import check_error_law, error_quantile, error_sparsity, simulate_dataset, true_beta
from simulate.harness import replication_rng, run_replications

logger = logging.getLogger(__name__)


def leading_term(data: Dataset, D: PrecisionEstimate, errors: np.ndarray, tau: float,
                 sparsity: float, quantile: float) -> np.ndarray:
    """n^-1/2 sparsity D sum_i X_i psi_tau(u_i - F^-1(tau))."""
    psi = score(np.asarray(errors, dtype=float) - quantile, tau)
    return sparsity * (D.D_hat @ (data.X.T @ psi)) / math.sqrt(data.n)


def sup_remainder(dpath: DebiasedPath, data: Dataset, beta_star: np.ndarray, errors: np.ndarray,
                  error: str) -> float:
    """
    sup over the grid of || sqrt(n)(beta_check - beta*(tau)) - leading term ||_inf.
    The leading term uses the true sparsity when the law has one, otherwise
    the sparsity the path was debiased with.
    """
    sparsity_fn = error_sparsity(error)
    worst = 0.0
    for k, tau in enumerate(dpath.grid.points):
        tau = float(tau)
        sparsity = sparsity_fn(tau) if sparsity_fn is not None else float(dpath.sparsity_used[k])
        lead = leading_term(data, dpath.precision, errors, tau, sparsity, error_quantile(error, tau))
        scaled = math.sqrt(data.n) * (dpath.beta_check[k] - true_beta(beta_star, tau, error))
        worst = max(worst, float(np.max(np.abs(scaled - lead))))
    return worst


def oracle_score_gap(data: Dataset, support: List[int], grid: TauGrid, errors: np.ndarray,
                     error: str) -> float:
    """sup over the grid of the gap between oracle rank scores and 1{u >= F^-1(tau)}."""
    worst = 0.0
    basis = None
    for tau in grid.points:
        scores = rank_scores_oracle(data, support, float(tau), warm_start=basis)
        basis = scores.basis
        worst = max(worst, rank_score_gap(scores, errors, error_quantile(error, float(tau))))
    return worst


def _remainder_replication(config: SimConfig, key) -> List[Dict[str, Any]]:
    n, p, rep = key
    setting = config.replace(n=n, p=p)
    data, beta_star, u = simulate_dataset(setting, replication_rng(config.seed, n, rep))
    grid = TauGrid.from_spec(config.remainder_grid)
    path = fit_path(data, grid, config.lambda0)
    D = estimate_precision(data, c2=config.c2, c3=config.c3)
    gap = oracle_score_gap(data, list(range(min(config.s, p) + 1)), grid, u, config.error)

    scale_grid = TauGrid.symmetric(config.s_grid_epsilon, config.s_grid_step)
    scale = scale_statistic_path(data, scale_grid, config.lambda0)
    h = select_bandwidth(data, support_size(path), scale_grid, grid.points, config.h, config.c4)
    modes = [(ESTIMATED, debias_path(path, D, scale, h, data, mode=ESTIMATED))]
    sparsity_fn = error_sparsity(config.error)
    if sparsity_fn is not None:
        modes.append((KNOWN, debias_path(path, D, None, None, data, mode=KNOWN, known=sparsity_fn)))
    return [{"n": n, "p": p, "rep": rep, "mode": mode,
             "remainder": sup_remainder(dpath, data, beta_star, u, config.error), "gap": gap}
            for mode, dpath in modes]


def remainder_diagnostic(config: SimConfig, workers: Optional[int] = None) -> RemainderDiagnostic:
    """
    Median sup-remainder and oracle rank-score gap over ``n_reps`` seeds for
    every n in the ladder, with p = round(p_ratio * n), in the estimated and
    (when the error law has a closed-form sparsity) the known mode.
    """
    check_error_law(config.error)
    keys = [(n, int(round(config.p_ratio * n)), rep) for n in config.n_ladder for rep in range(config.n_reps)]
    logger.info(f"remainder diagnostic: n in {config.n_ladder}, {config.n_reps} seeds each")
    records, _ = run_replications(_remainder_replication, config, keys, workers)

    rows = []
    modes = [ESTIMATED, KNOWN]
    for n in config.n_ladder:
        for mode in modes:
            picked = [r for r in records if r["n"] == n and r["mode"] == mode]
            if not picked:
                continue
            rows.append(RemainderRow(
                n=int(n), p=int(picked[0]["p"]), mode=mode,
                median_sup_remainder=float(np.median([r["remainder"] for r in picked])),
                median_rank_score_gap=float(np.median([r["gap"] for r in picked])),
                seeds=len(picked),
            ))
    return RemainderDiagnostic(rows=rows)
