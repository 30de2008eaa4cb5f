# -*- coding: utf-8 -*-
# End-to-end debiased estimation: penalized path, precision, scale path, bandwidth, debiasing.
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from infrastructure.errors import ConfigError
from infrastructure.schemas import (
    DebiasedPath, Dataset, PrecisionEstimate, QuantilePath, ScalePath, TauGrid,
)
from inference.debias import ESTIMATED, KNOWN, debias_path
from precision.clime import GAMMA_CONSTANT, L_CONSTANT, estimate_precision, sample_covariance
from quantile_fit.penalized_fit import fit_path
from rank_scores.rank_scores import scale_statistic_path
from rank_scores.sparsity import BANDWIDTH_CONSTANT, default_bandwidth

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-10


@dataclass(eq=False)
class InferenceRun:
    path: QuantilePath
    precision: PrecisionEstimate
    debiased: DebiasedPath
    scale_path: Optional[ScalePath] = field(default=None, repr=False)
    h: Optional[float] = None
    s_hat: int = 1


def support_size(path: QuantilePath) -> int:
    """Largest number of nonzero slopes along the path, at least 1."""
    counts = [int(np.count_nonzero(np.abs(fit.beta[1:]) > SUPPORT_TOL)) for fit in path.fits]
    return max(1, max(counts))


def select_bandwidth(data: Dataset, s_hat: int, scale_grid: TauGrid, taus: Sequence[float],
                     h: Optional[float] = None, c4: float = BANDWIDTH_CONSTANT) -> float:
    """User bandwidth if given, else the default rule snapped to the scale grid."""
    if h is not None:
        return float(h)
    return default_bandwidth(data.n, data.p, s_hat, scale_grid, taus=list(taus), c4=c4)


def oracle_precision(data: Dataset) -> PrecisionEstimate:
    """Exact inverse of the sample covariance, for low-dimensional (oracle) designs."""
    Sigma_hat = sample_covariance(data)
    try:
        D = np.linalg.inv(Sigma_hat)
    except np.linalg.LinAlgError:
        raise ConfigError("oracle design has a singular sample covariance")
    D = 0.5 * (D + D.T)
    return PrecisionEstimate(D_hat=D, gamma_n=0.0, L_n=float("inf"), column_log=[],
                             Sigma_hat=Sigma_hat, D_columns=D)


def run_inference(data: Dataset, grid: TauGrid, lambda0: Optional[float] = None,
                  c2: float = GAMMA_CONSTANT, c3: float = L_CONSTANT, h: Optional[float] = None,
                  c4: float = BANDWIDTH_CONSTANT, s_grid_epsilon: float = 0.05, s_grid_step: float = 0.005,
                  corrected: bool = False, known: Union[str, Callable[[float], float], None] = None,
                  workers: int = 1, precision: Optional[PrecisionEstimate] = None,
                  scale_path: Optional[ScalePath] = None,
                  support: Optional[Sequence[int]] = None) -> InferenceRun:
    """
    Debiased path on ``grid``.

    Args:
        data: dataset with intercept column.
        grid: inference grid.
        lambda0: penalty level, default_lambda0 when omitted.
        c2, c3: precision tuning constants.
        h: sparsity bandwidth; the default rule when omitted.
        c4: bandwidth constant.
        s_grid_epsilon, s_grid_step: grid of the scale rank statistic.
        corrected: bias-corrected sparsity estimator.
        known: closed-form sparsity (law name or callable); skips the scale path.
        workers: pool size for the precision columns.
        precision: reuse a precision estimate.
        scale_path: reuse a scale path computed on the same data.
        support: oracle support for the scale path.
    """
    path = fit_path(data, grid, lambda0)
    logger.info(f"fitted {len(grid)} quantile level(s) on n={data.n}, p={data.p}")
    if precision is None:
        precision = estimate_precision(data, c2=c2, c3=c3, workers=workers)
        logger.info(f"precision estimate: gamma={precision.gamma_n:.4g}, L={precision.L_n:.4g}, "
                    f"{len(precision.escalated_columns)} escalated column(s)")
    s_hat = support_size(path)

    if known is not None:
        dpath = debias_path(path, precision, None, None, data, mode=KNOWN, known=known)
        return InferenceRun(path=path, precision=precision, debiased=dpath, s_hat=s_hat)

    if scale_path is None:
        scale_grid = TauGrid.symmetric(s_grid_epsilon, s_grid_step)
        scale_path = scale_statistic_path(data, scale_grid, lambda0, support=support)
    bandwidth = select_bandwidth(data, s_hat, scale_path.grid, grid.points, h, c4)
    logger.info(f"sparsity bandwidth h={bandwidth:g} (s_hat={s_hat})")
    dpath = debias_path(path, precision, scale_path, bandwidth, data, mode=ESTIMATED, corrected=corrected)
    return InferenceRun(path=path, precision=precision, debiased=dpath, scale_path=scale_path,
                        h=bandwidth, s_hat=s_hat)
