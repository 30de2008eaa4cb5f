# -*- coding: utf-8 -*-
# Critical values: normal, chi-square, Kolmogorov series and Monte Carlo bridge suprema.
import logging
import math
from functools import lru_cache, partial
from typing import Optional, Tuple, Union

import numpy as np
from scipy import optimize, special, stats

from infrastructure.errors import ConfigError
from infrastructure.parallel import run_parallel
from infrastructure.schemas import CriticalValue, TauGrid

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0xC0FFEE
DEFAULT_PATHS = 100000
DEFAULT_STEPS = 1000
SERIES_TOL = 1e-12
# shift between discretely and continuously monitored maxima, in units of sqrt(dt)
MONITORING_SHIFT = 0.5826
BLOCK_ENTRIES = 2000000
FUNCTIONALS = ("norm", "qd", "qd2")

Horizon = Union[TauGrid, Tuple[float, float]]


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def normal_quantile(alpha: float) -> CriticalValue:
    """z_alpha, the (1 - alpha) standard normal quantile."""
    _check_alpha(alpha)
    return CriticalValue(kind="Normal", alpha=float(alpha), value=float(stats.norm.ppf(1.0 - alpha)))


def kolmogorov_cdf(t: float) -> float:
    """P(sup |B| <= t) = 1 - 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2)."""
    if t <= 0:
        return 0.0
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * t * t)
        total += term if k % 2 == 1 else -term
        if term < SERIES_TOL:
            break
        k += 1
    return max(0.0, min(1.0, 1.0 - 2.0 * total))


def kolmogorov_sup_quantile(alpha: float) -> CriticalValue:
    """u_alpha = inf{t : P(sup |B| <= t) >= 1 - alpha}, by bisection on the series."""
    _check_alpha(alpha)
    target = 1.0 - alpha
    value = optimize.bisect(lambda t: kolmogorov_cdf(t) - target, 0.05, 10.0, xtol=1e-12)
    return CriticalValue(kind="KolmogorovSup", alpha=float(alpha), value=float(value))


def chi2_cdf(d: int, z: float) -> float:
    return float(special.gammainc(d / 2.0, max(z, 0.0) / 2.0))


def chi2_sf(d: int, z: float) -> float:
    return float(special.gammaincc(d / 2.0, max(z, 0.0) / 2.0))


def chi2_quantile(d: int, level: float) -> float:
    """Bisection on the regularized lower incomplete gamma function."""
    if d < 1:
        raise ConfigError(f"degrees of freedom must be at least 1, got {d}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    hi = max(1.0, float(d))
    while chi2_cdf(d, hi) < level:
        hi *= 2.0
    return float(optimize.bisect(lambda z: chi2_cdf(d, z) - level, 0.0, hi, xtol=1e-12))


def chi2_critical_value(d: int, alpha: float) -> CriticalValue:
    _check_alpha(alpha)
    return CriticalValue(kind="Chi2", alpha=float(alpha), value=chi2_quantile(d, 1.0 - alpha),
                         metadata={"d": int(d)})


def _horizon_key(T: Optional[Horizon]) -> tuple:
    if T is None:
        return ("range", 0.0, 1.0)
    if isinstance(T, TauGrid):
        return ("grid",) + tuple(float(t) for t in T.points)
    lo, hi = (float(v) for v in T)
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigError(f"bridge horizon must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")
    return ("range", lo, hi)


def _monitor_indices(key: tuple, n_steps: int, functional: str) -> np.ndarray:
    if key[0] == "grid":
        # grid points are read off the nearest lattice time
        idx = np.unique(np.rint(np.asarray(key[1:]) * n_steps).astype(int))
    else:
        lo, hi = key[1], key[2]
        idx = np.arange(int(math.ceil(lo * n_steps - 1e-9)), int(math.floor(hi * n_steps + 1e-9)) + 1)
    if functional != "norm":
        idx = idx[(idx > 0) & (idx < n_steps)]
    if idx.size == 0:
        raise ConfigError("bridge horizon contains no interior lattice time")
    return idx


def _bridge_block(d: int, n_steps: int, idx: np.ndarray, functional: str,
                  job: Tuple[np.random.SeedSequence, int]) -> np.ndarray:
    seed_seq, size = job
    rng = np.random.default_rng(seed_seq)
    dt = 1.0 / n_steps
    W = np.cumsum(rng.standard_normal((size, n_steps, d)) * math.sqrt(dt), axis=1)
    W = np.concatenate([np.zeros((size, 1, d)), W], axis=1)
    t = np.arange(n_steps + 1) * dt
    B = W - t[None, :, None] * W[:, -1:, :]
    sq = np.sum(B[:, idx, :] ** 2, axis=2)
    if functional == "norm":
        return np.sqrt(sq.max(axis=1))
    ts = t[idx]
    q2 = sq / (ts * (1.0 - ts))[None, :]
    return q2.max(axis=1) if functional == "qd2" else np.sqrt(q2.max(axis=1))


@lru_cache(maxsize=16)
def _simulate_cached(d: int, key: tuple, seed: int, n_paths: int, n_steps: int,
                     functional: str, workers: int) -> np.ndarray:
    idx = _monitor_indices(key, n_steps, functional)
    block = max(1, BLOCK_ENTRIES // (n_steps * d))
    sizes = [min(block, n_paths - start) for start in range(0, n_paths, block)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    parts = run_parallel(partial(_bridge_block, d, n_steps, idx, functional),
                         list(zip(children, sizes)), workers, threads=True)
    sups = np.concatenate(parts)
    if functional == "norm" and key[0] == "range":
        sups = sups + MONITORING_SHIFT * math.sqrt(1.0 / n_steps)
    sups.setflags(write=False)
    logger.debug(f"simulated {n_paths} bridge paths (d={d}, {functional}, {len(sizes)} blocks)")
    return sups


def simulate_bridge_sups(d: int, T: Optional[Horizon] = None, seed: int = DEFAULT_SEED,
                         n_paths: int = DEFAULT_PATHS, n_steps: int = DEFAULT_STEPS,
                         functional: str = "norm", workers: int = 1) -> np.ndarray:
    """
    Suprema of a functional of a d-dimensional Brownian bridge B(t) = W(t) - t W(1).

    Args:
        d: bridge dimension.
        T: TauGrid (maximum over its points) or (lo, hi) range (every lattice
            time inside, plus the continuous-monitoring shift for "norm").
        seed: root of the per-block SeedSequence streams.
        n_paths: number of simulated paths.
        n_steps: lattice steps on [0, 1].
        functional: "norm" for sup ||B||, "qd" for sup ||B|| / sqrt(t(1-t)),
            "qd2" for its square.
        workers: thread count; results do not depend on it.

    Returns:
        read-only array of n_paths suprema.
    """
    if d < 1:
        raise ConfigError(f"bridge dimension must be at least 1, got {d}")
    if n_paths < 1 or n_steps < 2:
        raise ConfigError("need n_paths >= 1 and n_steps >= 2")
    if functional not in FUNCTIONALS:
        raise ConfigError(f"unknown bridge functional {functional!r}; choose from {FUNCTIONALS}")
    return _simulate_cached(int(d), _horizon_key(T), int(seed), int(n_paths), int(n_steps),
                            functional, max(1, int(workers)))


def _horizon_meta(T: Optional[Horizon]):
    key = _horizon_key(T)
    if key[0] == "grid":
        return {"grid": [key[1], key[-1], T.step]}
    return {"range": [key[1], key[2]]}


def bessel_sup_quantile(d: int, T: Optional[Horizon] = None, alpha: float = 0.05,
                        seed: int = DEFAULT_SEED, n_paths: int = DEFAULT_PATHS,
                        n_steps: int = DEFAULT_STEPS, functional: str = "norm",
                        workers: int = 1) -> CriticalValue:
    """Empirical (1 - alpha) quantile of the simulated bridge supremum."""
    _check_alpha(alpha)
    sups = simulate_bridge_sups(d, T, seed, n_paths, n_steps, functional, workers)
    value = float(np.quantile(sups, 1.0 - alpha))
    meta = {"d": int(d), "functional": functional, "seed": int(seed),
            "n_paths": int(n_paths), "n_steps": int(n_steps)}
    meta.update(_horizon_meta(T))
    return CriticalValue(kind="BesselSup", alpha=float(alpha), value=value, metadata=meta)


def mc_tail_probability(statistic: float, sups: np.ndarray) -> float:
    """Fraction of simulated suprema at or above the statistic."""
    return float(np.mean(sups >= statistic))
