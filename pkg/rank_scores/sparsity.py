# -*- coding: utf-8 -*-
# Rank-based sparsity estimators, bandwidth rule and closed-form sparsity of the error laws.
import logging
import math
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy import stats

from infrastructure.errors import BandwidthError, ConfigError
from infrastructure.schemas import ScalePath, SparsityEstimate, TauGrid

logger = logging.getLogger(__name__)

SPARSITY_FLOOR = 1e-3
BANDWIDTH_CONSTANT = 0.4
RICHARDSON_WEIGHTS = (4.0 / 3.0, 1.0 / 12.0)
PRINTED_WEIGHTS = (24.0 / 21.0, 1.0 / 14.0)


def _check_window(path: ScalePath, tau: float, h: float, reach: float, reject_straddle: bool):
    grid = path.grid
    if len(grid) < 2:
        raise BandwidthError("scale-statistic grid has a single point", tau)
    if h <= 0:
        raise BandwidthError(f"bandwidth must be positive, got {h}", tau)
    steps = h / grid.step
    if abs(steps - round(steps)) > 1e-6:
        raise BandwidthError(f"bandwidth {h} is not a multiple of the grid step {grid.step}", tau)
    if not grid.contains(tau):
        raise BandwidthError(f"tau={tau} is not a point of the scale-statistic grid", tau)
    if tau - reach < grid.lo - 1e-9 or tau + reach > grid.hi + 1e-9:
        raise BandwidthError(
            f"window [{tau - reach:.6g}, {tau + reach:.6g}] leaves the grid [{grid.lo}, {grid.hi}]", tau)
    if reject_straddle and abs(tau - 0.5) > 1e-12 and tau - reach < 0.5 < tau + reach:
        raise BandwidthError(f"window around tau={tau} straddles 0.5", tau)


def _second_difference(path: ScalePath, tau: float, g: float) -> float:
    grid = path.grid
    T = path.unwound
    return float(T[grid.index_of(tau + g)] - 2.0 * T[grid.index_of(tau)] + T[grid.index_of(tau - g)])


def sparsity_estimate(path: ScalePath, tau: float, h: float,
                      reject_straddle: bool = False) -> SparsityEstimate:
    """
    h^-2 times the second difference of the unwound scale path at tau,
    which off 1/2 is phi(tau) h^-2 (S(tau+h) - 2 S(tau) + S(tau-h)).
    Clamped below at SPARSITY_FLOOR.

    Raises:
        BandwidthError: window outside the grid, off-grid tau or h.
    """
    _check_window(path, tau, h, h, reject_straddle)
    raw = _second_difference(path, tau, h) / h ** 2
    return SparsityEstimate(tau=float(tau), value=max(raw, SPARSITY_FLOOR), h=float(h),
                            corrected=False, raw=raw)


def sparsity_estimate_corrected(path: ScalePath, tau: float, h: float,
                                weights: Tuple[float, float] = RICHARDSON_WEIGHTS,
                                reject_straddle: bool = False) -> SparsityEstimate:
    """
    Bias-corrected estimate a h^-2 D_h - b h^-2 D_2h from second differences
    at h and 2h. The default weights cancel the h^2 term of the expansion.
    """
    _check_window(path, tau, h, 2.0 * h, reject_straddle)
    a, b = weights
    raw = (a * _second_difference(path, tau, h) - b * _second_difference(path, tau, 2.0 * h)) / h ** 2
    return SparsityEstimate(tau=float(tau), value=max(raw, SPARSITY_FLOOR), h=float(h),
                            corrected=True, raw=raw)


def default_bandwidth(n: int, p: int, s_hat: int, grid: Optional[TauGrid] = None,
                      taus: Optional[Iterable[float]] = None, c4: float = BANDWIDTH_CONSTANT) -> float:
    """
    h = c4 s^(1/4) n^(-1/8) log(p v n)^(1/8).

    With a grid, h is snapped to the nearest multiple of the grid step and
    clamped to at most a quarter of the grid range and so that tau +- 2h
    stays inside the grid for every tau in ``taus``.
    """
    if s_hat < 1:
        raise ConfigError(f"s_hat must be at least 1, got {s_hat}")
    if c4 <= 0:
        raise ConfigError("bandwidth constant must be positive")
    h = c4 * s_hat ** 0.25 * n ** -0.125 * math.log(max(p, n)) ** 0.125
    if grid is None:
        return h

    step = grid.step
    limit = (grid.hi - grid.lo) / 4.0
    binding = float("nan")
    for tau in (taus if taus is not None else []):
        room = min((tau - grid.lo) / 2.0, (grid.hi - tau) / 2.0)
        if room < limit:
            limit, binding = room, float(tau)
    k = max(1, int(round(h / step)))
    k_max = int(math.floor(limit / step + 1e-9))
    if k_max < 1:
        where = "" if math.isnan(binding) else f" at tau={binding:g}"
        raise BandwidthError(f"no admissible bandwidth{where} on grid [{grid.lo}, {grid.hi}] step {step}",
                             tau=binding)
    if k > k_max:
        logger.debug(f"bandwidth {h:.4g} clamped to {k_max * step:.4g}")
    return round(min(k, k_max) * step, 12)


def _parse_law(name: str) -> Tuple[str, Optional[float]]:
    key = name.strip().lower()
    if key in ("normal", "gaussian"):
        return "normal", None
    if key in ("uniform",):
        return "uniform", None
    if key in ("cauchy", "t1"):
        return "cauchy", None
    if key.startswith("t"):
        try:
            df = float(key[1:])
        except ValueError:
            df = -1.0
        if df > 0:
            return "t", df
    raise ConfigError(f"no closed-form sparsity for error law {name!r}")


def known_sparsity(name: str) -> Callable[[float], float]:
    """tau -> 1 / f(F^-1(tau)) for normal, t<df> (t1 = Cauchy) and uniform(-1/2, 1/2) errors."""
    law, df = _parse_law(name)
    if law == "normal":
        return lambda tau: float(1.0 / stats.norm.pdf(stats.norm.ppf(tau)))
    if law == "uniform":
        return lambda tau: 1.0
    if law == "cauchy":
        return lambda tau: float(math.pi / math.sin(math.pi * tau) ** 2)
    return lambda tau: float(1.0 / stats.t.pdf(stats.t.ppf(tau, df), df))


def known_quantile(name: str) -> Callable[[float], float]:
    """tau -> F^-1(tau) for the same error laws as known_sparsity."""
    law, df = _parse_law(name)
    if law == "normal":
        return lambda tau: float(stats.norm.ppf(tau))
    if law == "uniform":
        return lambda tau: float(tau - 0.5)
    if law == "cauchy":
        return lambda tau: float(math.tan(math.pi * (tau - 0.5)))
    return lambda tau: float(stats.t.ppf(tau, df))


def sparsity_curve(path: ScalePath, taus: Iterable[float], h: float,
                   corrected: bool = False) -> np.ndarray:
    """Estimates over several tau on one path; NaN where the window leaves the grid."""
    values = []
    for tau in taus:
        try:
            est = (sparsity_estimate_corrected if corrected else sparsity_estimate)(path, float(tau), h)
            values.append(est.value)
        except BandwidthError:
            values.append(float("nan"))
    return np.array(values)
