# -*- coding: utf-8 -*-
# Monte Carlo harness: coverage, null distributions, power and sparsity curves.
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from infrastructure.errors import (
    BandwidthError, ConfigError, SimulationError, SingularSandwichError, SolverError,
)
from infrastructure.parallel import resolve_workers, run_parallel
from infrastructure.schemas import CoverageCell, CoverageReport, Dataset, SimConfig, TauGrid, to_builtin
from inference.bands import pointwise_ci
from inference.critical_values import normal_quantile
from inference.pipeline import oracle_precision, run_inference
from inference.wald import coefficient_hypothesis, sup_wald, wald_stat
from precision.clime import estimate_precision
from rank_scores.rank_scores import scale_statistic_path
from rank_scores.sparsity import known_sparsity, sparsity_curve
from simulate.designs import check_error_law, default_beta, simulate_dataset, true_beta

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.02
METHOD = "method"
ORACLE = "oracle"
CURVE_ERRORS = ("normal", "t1")


@dataclass(eq=False)
class NullDistribution:
    """Standardized statistics sqrt(n)(beta_check_j - beta_j) / sigma_j per replication."""
    tau: float
    coord: int
    method_stats: np.ndarray
    oracle_stats: np.ndarray
    n_reps: int
    n_failed: int
    config: Dict[str, Any] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        rows = [{"method": METHOD, "rep": k, "stat": v} for k, v in enumerate(self.method_stats)]
        rows += [{"method": ORACLE, "rep": k, "stat": v} for k, v in enumerate(self.oracle_stats)]
        return pd.DataFrame(rows, columns=["method", "rep", "stat"])

    def summary(self) -> Dict[str, Any]:
        out = {"tau": self.tau, "coord": self.coord, "n_reps": self.n_reps, "n_failed": self.n_failed}
        for name, values in ((METHOD, self.method_stats), (ORACLE, self.oracle_stats)):
            if values.size:
                out[name] = {
                    "mean": float(np.mean(values)),
                    "sd": float(np.std(values, ddof=1)) if values.size > 1 else float("nan"),
                    "ks_normal": float(stats.kstest(values, "norm").statistic),
                }
        if self.method_stats.size and self.oracle_stats.size:
            out["ks_method_vs_oracle"] = float(stats.ks_2samp(self.method_stats, self.oracle_stats).statistic)
        return to_builtin(out)


def replication_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])


def _guarded(fn: Callable, config: SimConfig, key) -> Optional[List[Dict[str, Any]]]:
    try:
        return fn(config, key)
    except (SolverError, BandwidthError, SingularSandwichError, np.linalg.LinAlgError) as e:
        logger.warning(f"replication {key} failed: {e}")
        return None


def run_replications(fn: Callable, config: SimConfig, keys: List, workers: Optional[int]):
    workers = resolve_workers(workers if workers is not None else config.threads)
    results = run_parallel(partial(_guarded, fn, config), keys, workers)
    failed = sum(1 for r in results if r is None)
    if failed and failed >= MAX_FAILURE_RATE * len(keys):
        raise SimulationError(f"{failed} of {len(keys)} replications failed "
                              f"(limit {MAX_FAILURE_RATE:.0%})")
    records = [rec for r in results if r is not None for rec in r]
    return records, failed


def _oracle_support(config: SimConfig, j: int) -> List[int]:
    return sorted(set(range(min(config.s, config.p) + 1)) | {int(j)})


def _interval_record(ci, truth: float, z: float, n: int, **keys) -> Dict[str, Any]:
    se = ci.half_width / z
    record = dict(keys)
    record.update({
        "covered": bool(ci.lower <= truth <= ci.upper),
        "sqrt_n_width": 2.0 * ci.half_width * math.sqrt(n),
        "stat": (ci.estimate - truth) / se if se > 0 else float("nan"),
    })
    return record


def _coverage_replication(config: SimConfig, rep: int) -> List[Dict[str, Any]]:
    rng = replication_rng(config.seed, rep)
    data, beta_star, _ = simulate_dataset(config, rng)
    z = normal_quantile(config.alpha).value
    options = dict(lambda0=config.lambda0, c2=config.c2, c3=config.c3, h=config.h, c4=config.c4,
                   s_grid_epsilon=config.s_grid_epsilon, s_grid_step=config.s_grid_step)

    records = []
    precision = estimate_precision(data, c2=config.c2, c3=config.c3)
    scale = None
    for tau in config.taus:
        run = run_inference(data, TauGrid.single(tau), precision=precision, scale_path=scale, **options)
        scale = run.scale_path
        truth = true_beta(beta_star, tau, config.error)
        for j in config.coords:
            ci = pointwise_ci(run.debiased, np.eye(data.X.shape[1])[j], tau, config.alpha)
            records.append(_interval_record(ci, truth[j], z, data.n, rep=rep, tau=tau, coord=j, method=METHOD))

    if config.oracle:
        for j in config.coords:
            support = _oracle_support(config, j)
            sub = Dataset(Y=data.Y, X=data.X[:, support])
            precision_s = oracle_precision(sub)
            scale_s = None
            pos = support.index(j)
            for tau in config.taus:
                run = run_inference(sub, TauGrid.single(tau), lambda0=0.0, h=config.h, c4=config.c4,
                                    s_grid_epsilon=config.s_grid_epsilon, s_grid_step=config.s_grid_step,
                                    precision=precision_s, scale_path=scale_s,
                                    support=range(len(support)))
                scale_s = run.scale_path
                truth = true_beta(beta_star, tau, config.error)
                ci = pointwise_ci(run.debiased, np.eye(len(support))[pos], tau, config.alpha)
                records.append(_interval_record(ci, truth[j], z, data.n, rep=rep, tau=tau, coord=j,
                                                method=ORACLE))
    return records


def _coverage_cells(frame: pd.DataFrame, setting: str) -> List[CoverageCell]:
    cells = []
    for (tau, coord, method), group in frame.groupby(["tau", "coord", "method"], sort=True):
        c = float(group["covered"].mean())
        n_ok = int(len(group))
        cells.append(CoverageCell(
            setting=setting, tau=float(tau), coord=int(coord), method=str(method),
            coverage=100.0 * c, mc_se=100.0 * math.sqrt(c * (1.0 - c) / n_ok),
            mean_sqrt_n_width=float(group["sqrt_n_width"].mean()), n_ok=n_ok,
        ))
    return cells


def _coverage_frame(config: SimConfig, workers: Optional[int]):
    check_error_law(config.error)
    logger.info(f"coverage study: {config.setting_label}, n={config.n}, p={config.p}, "
                f"{config.n_reps} replications")
    records, failed = run_replications(_coverage_replication, config, list(range(config.n_reps)), workers)
    return pd.DataFrame(records), failed


def run_coverage(config: SimConfig, workers: Optional[int] = None) -> CoverageReport:
    """
    Empirical coverage of the (1 - 2 alpha) pointwise intervals for the
    configured coordinates, with oracle counterparts when enabled.
    """
    frame, failed = _coverage_frame(config, workers)
    cells = _coverage_cells(frame, config.setting_label) if not frame.empty else []
    return CoverageReport(cells=cells, n_reps=config.n_reps, n_failed=failed, config=config.to_dict())


def run_null_distribution(config: SimConfig, j: Optional[int] = None,
                          workers: Optional[int] = None) -> NullDistribution:
    """Standardized statistics of coordinate ``j`` at the first configured tau."""
    j = config.coords[0] if j is None else int(j)
    config = config.replace(coords=[j], taus=[config.taus[0]])
    frame, failed = _coverage_frame(config, workers)

    def pick(method):
        if frame.empty:
            return np.zeros(0)
        return frame.loc[frame["method"] == method].sort_values("rep")["stat"].to_numpy(dtype=float)

    return NullDistribution(tau=config.taus[0], coord=j, method_stats=pick(METHOD),
                            oracle_stats=pick(ORACLE), n_reps=config.n_reps, n_failed=failed,
                            config=config.to_dict())


def _power_replication(config: SimConfig, key) -> List[Dict[str, Any]]:
    rep, k = key
    delta = config.deltas[k]
    rng = replication_rng(config.seed, rep, k)
    beta_star = default_beta(config.p, config.s)
    beta_star[config.test_coord] = delta
    data, _, _ = simulate_dataset(config, rng, beta_star=beta_star)

    grid = TauGrid.from_spec(config.sup_grid)
    run = run_inference(data, grid, lambda0=config.lambda0, c2=config.c2, c3=config.c3, h=config.h,
                        c4=config.c4, s_grid_epsilon=config.s_grid_epsilon, s_grid_step=config.s_grid_step)
    M, r = coefficient_hypothesis(data.X.shape[1], {config.test_coord: 0.0})
    records = []
    for tau in config.taus:
        result = wald_stat(run.debiased, M, r, tau, alpha=config.test_alpha)
        records.append({"rep": rep, "delta": delta, "test": f"wald@{tau:g}", "reject": result.reject,
                        "statistic": result.statistic, "p_value": result.p_value})
    result = sup_wald(run.debiased, M, r, alpha=config.test_alpha, n_paths=config.bessel_paths,
                      n_steps=config.bessel_steps)
    records.append({"rep": rep, "delta": delta, "test": "sup-wald", "reject": result.reject,
                    "statistic": result.statistic, "p_value": result.p_value})
    return records


def run_power(config: SimConfig, workers: Optional[int] = None) -> pd.DataFrame:
    """
    Rejection rates (%) of H0: beta_j = 0 for j = test_coord when the true
    coefficient is delta, for every delta in the config; delta = 0 is the
    null calibration.
    """
    check_error_law(config.error)
    grid = TauGrid.from_spec(config.sup_grid)
    for tau in config.taus:
        if not grid.contains(tau):
            raise ConfigError(f"Wald level tau={tau} is not on the sup-Wald grid {config.sup_grid}")
    keys = [(rep, k) for k in range(len(config.deltas)) for rep in range(config.n_reps)]
    logger.info(f"power study: {len(config.deltas)} alternative(s) x {config.n_reps} replications")
    records, failed = run_replications(_power_replication, config, keys, workers)
    frame = pd.DataFrame(records)
    rows = []
    for (delta, test), group in frame.groupby(["delta", "test"], sort=True):
        c = float(group["reject"].mean())
        n_ok = int(len(group))
        rows.append({"delta": float(delta), "test": str(test), "rejection_rate": 100.0 * c,
                     "mc_se": 100.0 * math.sqrt(c * (1.0 - c) / n_ok), "n_ok": n_ok})
    if failed:
        logger.warning(f"power study: {failed} failed replication(s) excluded")
    return pd.DataFrame(rows, columns=["delta", "test", "rejection_rate", "mc_se", "n_ok"])


def _curve_replication(config: SimConfig, rep: int) -> List[Dict[str, Any]]:
    taus = TauGrid.from_spec(config.curve_grid).points
    scale_grid = TauGrid.symmetric(config.s_grid_epsilon, config.s_grid_step)
    records = []
    for k, error in enumerate(CURVE_ERRORS):
        data, _, _ = simulate_dataset(config.replace(error=error), replication_rng(config.seed, rep, k))
        scale = scale_statistic_path(data, scale_grid, config.lambda0)
        truth = known_sparsity(error)
        for h in config.bandwidths:
            plain = sparsity_curve(scale, taus, h)
            corrected = sparsity_curve(scale, taus, h, corrected=True)
            for tau, a, b in zip(taus, plain, corrected):
                records.append({"rep": rep, "error": error, "h": float(h), "tau": float(tau),
                                "estimate": a, "corrected": b, "truth": truth(float(tau))})
    return records


def run_sparsity_curve(config: SimConfig, workers: Optional[int] = None) -> pd.DataFrame:
    """
    Median sparsity estimates over the curve grid for every bandwidth,
    under Normal and t1 errors, next to the closed-form truth. Windows
    leaving the scale grid give NaN.
    """
    records, _ = run_replications(_curve_replication, config, list(range(config.n_reps)), workers)
    frame = pd.DataFrame(records)
    grouped = frame.groupby(["error", "h", "tau"], sort=True)
    out = grouped.agg(median_estimate=("estimate", "median"), median_corrected=("corrected", "median"),
                      truth=("truth", "first")).reset_index()
    return out
