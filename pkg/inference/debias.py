# -*- coding: utf-8 -*-
# One-step debiasing of penalized quantile fits.
import logging
from typing import Callable, Optional, Union

import numpy as np

from infrastructure.errors import ConfigError
from infrastructure.schemas import (
    DebiasedPath, Dataset, PrecisionEstimate, QuantileFit, QuantilePath, ScalePath,
)
from quantile_fit.check_loss import score
from rank_scores.sparsity import known_sparsity, sparsity_estimate, sparsity_estimate_corrected

logger = logging.getLogger(__name__)

ESTIMATED = "estimated"
KNOWN = "known"


def score_average(fit: QuantileFit, data: Dataset) -> np.ndarray:
    """n^-1 sum_i X_i psi_tau(r_i); interpolated residuals count as psi = tau."""
    return data.X.T @ score(fit.residuals, fit.tau) / data.n


def debias(fit: QuantileFit, D: PrecisionEstimate, sparsity: float, data: Dataset) -> np.ndarray:
    """beta_check = beta_hat + sparsity * D_hat (n^-1 sum_i X_i psi_tau(r_i))."""
    if not sparsity > 0:
        raise ConfigError(f"sparsity must be positive, got {sparsity}")
    return fit.beta + sparsity * (D.D_hat @ score_average(fit, data))


def sandwich_form(D: PrecisionEstimate, x: np.ndarray) -> float:
    """x' D Sigma D x, with |.| and a warning if symmetrization noise made it negative."""
    Dx = D.D_hat @ np.asarray(x, dtype=float)
    value = float(Dx @ D.Sigma_hat @ Dx)
    if value < 0:
        logger.warning(f"non-PSD sandwich form {value:.3e}; using its absolute value")
        value = abs(value)
    return value


def debias_path(path: QuantilePath, D: PrecisionEstimate, scale_path: Optional[ScalePath], h: Optional[float],
                data: Dataset, mode: str = ESTIMATED,
                known: Union[str, Callable[[float], float], None] = None,
                corrected: bool = False) -> DebiasedPath:
    """
    Debiases every fit of ``path``.

    Args:
        path: penalized fits on the inference grid.
        D: precision estimate.
        scale_path: scale rank statistic for the estimated mode.
        h: sparsity bandwidth for the estimated mode.
        data: the data the fits were computed on.
        mode: "estimated" uses the rank-score sparsity estimate, "known"
            the closed-form sparsity of the error law.
        known: law name (see known_sparsity) or callable tau -> sparsity.
        corrected: use the bias-corrected sparsity estimator.
    """
    if mode == KNOWN:
        if known is None:
            raise ConfigError("known mode needs an error law or a sparsity function")
        sparsity_fn = known_sparsity(known) if isinstance(known, str) else known
        sparsity = [float(sparsity_fn(float(tau))) for tau in path.grid.points]
    elif mode == ESTIMATED:
        if scale_path is None or h is None:
            raise ConfigError("estimated mode needs a scale path and a bandwidth")
        estimator = sparsity_estimate_corrected if corrected else sparsity_estimate
        sparsity = [estimator(scale_path, float(tau), h).value for tau in path.grid.points]
    else:
        raise ConfigError(f"unknown debiasing mode {mode!r}")

    beta_check = np.vstack([debias(fit, D, s, data) for fit, s in zip(path.fits, sparsity)])
    return DebiasedPath(grid=path.grid, beta_check=beta_check, sparsity_used=np.array(sparsity),
                        precision=D, n=data.n, beta_hat=path.betas, mode=mode,
                        h=h if mode == ESTIMATED else None)
