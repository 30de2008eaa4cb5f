# -*- coding: utf-8 -*-
# Check-loss primitives.
import numpy as np

ZERO_RESIDUAL_TOL = 1e-8


def _validate_tau(tau: float):
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")


def check_loss(z, tau: float):
    """rho_tau(z) = z * (tau - 1{z < 0}); works elementwise on arrays."""
    _validate_tau(tau)
    z = np.asarray(z, dtype=float)
    value = z * (tau - (z < 0))
    return float(value) if value.ndim == 0 else value


def score(z, tau: float):
    """psi_tau(z) = tau - 1{z < 0}; equals tau at z = 0."""
    _validate_tau(tau)
    z = np.asarray(z, dtype=float)
    value = tau - (z < 0).astype(float)
    return float(value) if value.ndim == 0 else value


def snap_residuals(residuals: np.ndarray, tol: float = ZERO_RESIDUAL_TOL) -> np.ndarray:
    """Sets interpolated residuals (|r| <= tol) to exactly zero."""
    r = np.array(residuals, dtype=float, copy=True)
    r[np.abs(r) <= tol] = 0.0
    return r


def mean_check_loss(residuals: np.ndarray, tau: float) -> float:
    return float(np.mean(check_loss(residuals, tau)))
