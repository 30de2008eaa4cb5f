# -*- coding: utf-8 -*-
# Pointwise intervals and uniform-in-tau confidence bands.
import logging
import math
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from infrastructure.errors import ConfigError
from infrastructure.schemas import (
    ConfidenceBand, ConfidenceInterval, CriticalValue, DebiasedPath, PrecisionEstimate, TauGrid,
)
from inference.critical_values import (
    DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_STEPS, bessel_sup_quantile, kolmogorov_sup_quantile,
    normal_quantile,
)
from inference.debias import sandwich_form

logger = logging.getLogger(__name__)

CALIBRATIONS = ("studentized", "kolmogorov", "bessel-norm")

Reference = Union[Callable[[float], float], Sequence[float], None]


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 0.5:
        raise ConfigError(f"alpha must lie in (0, 0.5), got {alpha}")


def _interval(dpath: DebiasedPath, x: np.ndarray, tau: float, crit: float, quad: float) -> ConfidenceInterval:
    beta, sparsity = dpath.at(tau)
    estimate = float(x @ beta)
    half = sparsity * crit * math.sqrt(tau * (1.0 - tau) * quad) / math.sqrt(dpath.n)
    return ConfidenceInterval(tau=float(tau), estimate=estimate, lower=estimate - half,
                              upper=estimate + half, half_width=half)


def _loading(dpath: DebiasedPath, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != dpath.beta_check.shape[1]:
        raise ConfigError(f"loading has length {x.shape[0]}, expected {dpath.beta_check.shape[1]}")
    return x


def pointwise_ci(dpath: DebiasedPath, x, tau: float, alpha: float = 0.025,
                 D: Optional[PrecisionEstimate] = None) -> ConfidenceInterval:
    """
    x'beta_check(tau) +- sparsity z_alpha sqrt(tau (1 - tau) x'D Sigma D x / n),
    a (1 - 2 alpha) interval.
    """
    _check_alpha(alpha)
    D = D or dpath.precision
    x = _loading(dpath, x)
    return _interval(dpath, x, tau, normal_quantile(alpha).value, sandwich_form(D, x))


def _band_grid(dpath: DebiasedPath, T: Optional[TauGrid]) -> TauGrid:
    if T is None:
        return dpath.grid
    for tau in T.points:
        if not dpath.grid.contains(tau):
            raise ConfigError(f"band point tau={tau} is not on the debiased grid")
    return T


def band_critical_value(d: int, T: TauGrid, alpha: float, calibration: str = "studentized",
                        seed: int = DEFAULT_SEED, n_paths: int = DEFAULT_PATHS,
                        n_steps: int = DEFAULT_STEPS, workers: int = 1) -> CriticalValue:
    """
    Band multiplier. "studentized" is the (1 - alpha) quantile of
    sup_T ||B_d(t)|| / sqrt(t (1 - t)) on the band grid, matching the
    sqrt(tau (1 - tau)) in the half-widths; "kolmogorov" (d = 1) and
    "bessel-norm" use the unstudentized supremum over (0, 1).
    """
    if calibration == "studentized":
        return bessel_sup_quantile(d, T, alpha, seed, n_paths, n_steps, functional="qd", workers=workers)
    if calibration == "kolmogorov":
        if d != 1:
            raise ConfigError("kolmogorov calibration is one-dimensional")
        return kolmogorov_sup_quantile(alpha)
    if calibration == "bessel-norm":
        return bessel_sup_quantile(d, (0.0, 1.0), alpha, seed, n_paths, n_steps, functional="norm",
                                   workers=workers)
    raise ConfigError(f"unknown band calibration {calibration!r}; choose from {CALIBRATIONS}")


def _covered(intervals: List[ConfidenceInterval], reference: Reference) -> Optional[bool]:
    if reference is None:
        return None
    if callable(reference):
        truth = [float(reference(ci.tau)) for ci in intervals]
    else:
        truth = [float(v) for v in np.atleast_1d(reference)]
        if len(truth) == 1:
            truth = truth * len(intervals)
        if len(truth) != len(intervals):
            raise ConfigError("reference needs one value per band point")
    return all(ci.lower <= t <= ci.upper for ci, t in zip(intervals, truth))


def uniform_band(dpath: DebiasedPath, e, T: Optional[TauGrid] = None, alpha: float = 0.05,
                 D: Optional[PrecisionEstimate] = None, critical_value: Optional[CriticalValue] = None,
                 calibration: str = "studentized", reference: Reference = None,
                 seed: int = DEFAULT_SEED, n_paths: int = DEFAULT_PATHS, n_steps: int = DEFAULT_STEPS,
                 workers: int = 1, label: str = "") -> ConfidenceBand:
    """
    Band e'beta_check(tau) +- j_n(tau) over the points of T.

    Args:
        dpath: debiased path whose grid contains T.
        e: loading vector.
        T: band grid, the whole debiased grid by default.
        alpha: the band has asymptotic coverage 1 - alpha.
        critical_value: overrides the calibration (e.g. z_alpha).
        reference: true path (callable or values) for the coverage flag.
    """
    _check_alpha(alpha)
    D = D or dpath.precision
    e = _loading(dpath, e)
    T = _band_grid(dpath, T)
    crit = critical_value or band_critical_value(1, T, alpha, calibration, seed, n_paths, n_steps, workers)
    quad = sandwich_form(D, e)
    intervals = [_interval(dpath, e, float(tau), crit.value, quad) for tau in T.points]
    return ConfidenceBand(loading=e, intervals=intervals, critical_value=crit,
                          covered=_covered(intervals, reference), label=label)


def simultaneous_band(dpath: DebiasedPath, W: Sequence, T: Optional[TauGrid] = None, alpha: float = 0.05,
                      d: int = 1, D: Optional[PrecisionEstimate] = None,
                      critical_value: Optional[CriticalValue] = None, calibration: str = "studentized",
                      references: Optional[Sequence[Reference]] = None, seed: int = DEFAULT_SEED,
                      n_paths: int = DEFAULT_PATHS, n_steps: int = DEFAULT_STEPS,
                      workers: int = 1) -> List[ConfidenceBand]:
    """
    Bands for every loading w in W sharing one d-dimensional multiplier;
    each w may have at most d nonzero entries besides the intercept.
    """
    _check_alpha(alpha)
    if d < 1:
        raise ConfigError(f"d must be at least 1, got {d}")
    D = D or dpath.precision
    loadings = [_loading(dpath, w) for w in W]
    if not loadings:
        raise ConfigError("no loading vectors given")
    for k, w in enumerate(loadings):
        if np.count_nonzero(w[1:]) > d:
            raise ConfigError(f"loading {k} has more than d={d} nonzero covariate entries")
    if references is not None and len(references) != len(loadings):
        raise ConfigError("need one reference per loading")
    T = _band_grid(dpath, T)
    crit = critical_value or band_critical_value(d, T, alpha, calibration, seed, n_paths, n_steps, workers)
    bands = []
    for k, w in enumerate(loadings):
        quad = sandwich_form(D, w)
        intervals = [_interval(dpath, w, float(tau), crit.value, quad) for tau in T.points]
        ref = references[k] if references is not None else None
        bands.append(ConfidenceBand(loading=w, intervals=intervals, critical_value=crit,
                                    covered=_covered(intervals, ref), label=f"w{k}"))
    return bands
