# -*- coding: utf-8 -*-
# hdqr command line: fit, infer, test, simulate, critvals.
import argparse
import json
import logging
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cli.io import OutputBundle, load_dataset, load_hypothesis, load_json
from infrastructure.errors import ConfigError, HdqrError, SolverError
from infrastructure.logging_setup import configure_logging, log_info
from infrastructure.parallel import resolve_workers
from infrastructure.schemas import Dataset, RunConfig, TauGrid, to_builtin
from inference.bands import CALIBRATIONS, pointwise_ci, uniform_band
from inference.critical_values import (
    DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_STEPS, bessel_sup_quantile, chi2_critical_value,
    kolmogorov_sup_quantile, normal_quantile,
)
from inference.pipeline import InferenceRun, run_inference
from inference.wald import (
    coefficient_hypothesis, dominance_hypothesis, structural_hypothesis, sup_wald, wald_stat,
)
from quantile_fit.penalized_fit import fit_path
from rank_scores.sparsity import known_sparsity
from simulate.harness import run_coverage, run_null_distribution, run_power, run_sparsity_curve
from simulate.presets import PRESETS, build_settings, preset_settings
from simulate.remainder import remainder_diagnostic
from simulate.reporting import coverage_frame, format_coverage_table, remainder_frame

logger = logging.getLogger(__name__)

CI_ALPHA = 0.025
BAND_ALPHA = 0.05
TEST_ALPHA = 0.05
CRITVAL_KINDS = ("z", "chi2", "kolmogorov", "bessel")


def _run_config(args, command: str, alpha: float) -> RunConfig:
    return RunConfig(
        command=command, data_path=args.data, tau=args.tau, tau_grid=args.tau_grid, alpha=alpha,
        lambda0=args.lambda0, c2=getattr(args, "c2", 1.0), c3=getattr(args, "c3", 2.0),
        h=getattr(args, "h", None), c4=getattr(args, "c4", 0.4), seed=args.seed, out_dir=args.out,
        threads=resolve_workers(args.threads), corrected=getattr(args, "corrected", False),
        known_sigma=getattr(args, "known_sigma", None),
        s_grid_epsilon=getattr(args, "s_grid_epsilon", 0.05), s_grid_step=getattr(args, "s_grid_step", 0.005),
        log_json=args.log_json,
    )


def parse_loading(text: str, q: int) -> np.ndarray:
    """``eJ`` for the J-th unit vector, or q comma-separated numbers."""
    text = text.strip()
    if text.startswith("e"):
        try:
            j = int(text[1:])
        except ValueError:
            raise ConfigError(f"cannot parse loading {text!r}")
        if not 0 <= j < q:
            raise ConfigError(f"loading index {j} outside [0, {q - 1}]")
        return np.eye(q)[j]
    try:
        values = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse loading {text!r}")
    if values.shape != (q,):
        raise ConfigError(f"loading needs {q} entries, got {values.shape[0]}")
    return values


def _parse_pair(text: str, sep: str, flag: str) -> Tuple[str, str]:
    if sep not in text:
        raise ConfigError(f"{flag} expects a{sep}b, got {text!r}")
    left, right = text.split(sep, 1)
    return left.strip(), right.strip()


def parse_coefficients(items: Sequence[str]) -> Dict[int, float]:
    values = {}
    for item in items:
        j, v = _parse_pair(item, "=", "--coef")
        try:
            values[int(j)] = float(v)
        except ValueError:
            raise ConfigError(f"cannot parse --coef {item!r}")
    return values


def _index_list(text: str, flag: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated indices, got {text!r}")


def _beta_columns(q: int, prefix: str) -> List[str]:
    return [f"{prefix}_{j}" for j in range(q)]


def _inference(args, data: Dataset, config: RunConfig) -> InferenceRun:
    known = config.known_sigma
    if known is not None:
        known_sparsity(known)
    return run_inference(data, config.grid(), lambda0=config.lambda0, c2=config.c2, c3=config.c3,
                         h=config.h, c4=config.c4, s_grid_epsilon=config.s_grid_epsilon,
                         s_grid_step=config.s_grid_step, corrected=config.corrected, known=known,
                         workers=config.threads)


def cmd_fit(args) -> int:
    config = _run_config(args, "fit", CI_ALPHA)
    data = load_dataset(config.data_path)
    grid = config.grid()
    path = fit_path(data, grid, config.lambda0, workers=config.threads)

    q = data.X.shape[1]
    frame = pd.DataFrame(path.betas, columns=_beta_columns(q, "beta"))
    frame.insert(0, "tau", grid.points)
    bundle = OutputBundle(config.out_dir)
    bundle.add_frame("beta_path.csv", frame)
    bundle.add_json("fit_meta.json", {"n": data.n, "p": data.p, "fits": [fit.to_dict() for fit in path.fits]})
    bundle.commit()
    return 0


def _interval_rows(intervals, critical_value: float, **keys) -> List[Dict]:
    rows = []
    for ci in intervals:
        row = dict(keys)
        row.update(ci.to_dict())
        row["critical_value"] = critical_value
        rows.append(row)
    return rows


def cmd_infer(args) -> int:
    alpha = args.alpha if args.alpha is not None else (BAND_ALPHA if args.band else CI_ALPHA)
    config = _run_config(args, "infer", alpha)
    data = load_dataset(config.data_path)
    q = data.X.shape[1]
    loading = parse_loading(args.x, q) if args.x is not None else None
    if args.band and loading is None:
        raise ConfigError("--band needs a loading vector (--e/--x)")

    run = _inference(args, data, config)
    dpath = run.debiased
    grid = dpath.grid
    bundle = OutputBundle(config.out_dir)

    frame = pd.DataFrame(dpath.beta_check, columns=_beta_columns(q, "beta_check"))
    frame.insert(0, "tau", grid.points)
    bundle.add_frame("debiased_path.csv", frame)
    bundle.add_frame("sparsity_path.csv", pd.DataFrame({
        "tau": grid.points, "sparsity": dpath.sparsity_used, "mode": dpath.mode,
        "h": run.h if run.h is not None else np.nan,
    }))

    if args.band:
        band = uniform_band(dpath, loading, alpha=alpha, calibration=args.band_calibration, seed=config.seed,
                            n_paths=args.n_paths, n_steps=args.n_steps, workers=config.threads)
        bundle.add_frame("band.csv", pd.DataFrame(_interval_rows(band.intervals, band.critical_value.value)))
        meta_band = band.critical_value.to_dict()
    else:
        z = normal_quantile(alpha).value
        rows = []
        loadings = [(args.x, loading)] if loading is not None else [(f"e{j}", np.eye(q)[j]) for j in range(q)]
        for tau in grid.points:
            for label, x in loadings:
                rows += _interval_rows([pointwise_ci(dpath, x, float(tau), alpha)], z, loading=label)
        bundle.add_frame("ci.csv", pd.DataFrame(rows))
        meta_band = None

    meta = run.precision.to_dict()
    meta.update({"n": data.n, "p": data.p, "s_hat": run.s_hat, "h": run.h, "mode": dpath.mode,
                 "alpha": alpha, "band_critical_value": meta_band})
    bundle.add_json("precision_meta.json", meta)
    bundle.commit()
    return 0


def _hypothesis(args, q: int) -> Tuple[np.ndarray, np.ndarray, str]:
    chosen = [name for name, value in (("coef", args.coef), ("structural", args.structural),
                                       ("dominance", args.dominance), ("hypothesis", args.hypothesis))
              if value]
    if len(chosen) != 1:
        raise ConfigError("give exactly one of --coef, --structural, --dominance, --hypothesis")
    kind = chosen[0]
    if kind == "coef":
        M, r = coefficient_hypothesis(q, parse_coefficients(args.coef))
    elif kind == "structural":
        k, j = _parse_pair(args.structural, ",", "--structural")
        try:
            M, r = structural_hypothesis(q, int(k), int(j))
        except ValueError:
            raise ConfigError(f"cannot parse --structural {args.structural!r}")
    elif kind == "dominance":
        M, r = dominance_hypothesis(q, _index_list(args.dominance, "--dominance"))
    else:
        M, r = load_hypothesis(args.hypothesis, q)
    return M, r, kind


def cmd_test(args) -> int:
    alpha = args.alpha if args.alpha is not None else TEST_ALPHA
    config = _run_config(args, "test", alpha)
    data = load_dataset(config.data_path)
    M, r, kind = _hypothesis(args, data.X.shape[1])
    grid = config.grid()
    if not args.sup and len(grid) != 1:
        raise ConfigError("the pointwise Wald test needs a single --tau; use --sup with --tau-grid")

    run = _inference(args, data, config)
    if args.sup:
        result = sup_wald(run.debiased, M, r, alpha=alpha, seed=config.seed, n_paths=args.n_paths,
                          n_steps=args.n_steps, workers=config.threads)
    else:
        result = wald_stat(run.debiased, M, r, grid.lo, alpha=alpha)
    out = result.to_dict()
    out.update({"hypothesis": kind, "sup": bool(args.sup), "h": run.h, "mode": run.debiased.mode})
    bundle = OutputBundle(config.out_dir)
    bundle.add_json("test.json", out)
    bundle.commit()
    print(f"statistic={result.statistic:.6g} critical_value={result.critical_value.value:.6g} "
          f"p_value={result.p_value:.4g} reject={result.reject}")
    return 0


def _simulation_settings(args):
    if bool(args.preset) == bool(args.config):
        raise ConfigError("give exactly one of --preset and --config")
    threads = args.threads
    if args.preset:
        return preset_settings(args.preset, seed=args.seed, threads=threads)
    raw = load_json(args.config)
    entries = raw if isinstance(raw, list) else [raw]
    if not all(isinstance(e, dict) for e in entries):
        raise ConfigError(f"{args.config}: expected a JSON object or a list of objects")
    return build_settings(entries, seed=args.seed, threads=threads)


def cmd_simulate(args) -> int:
    settings = _simulation_settings(args)
    bundle = OutputBundle(args.out)
    summary = {"settings": [s.to_dict() for s in settings]}
    coverage, nulls, power, remainder, curves = [], [], [], [], []

    for setting in settings:
        log_info(f"setting {setting.name} ({setting.kind})", component="simulate", logger=logger)
        if setting.kind == "coverage":
            coverage.append(run_coverage(setting))
        elif setting.kind == "null-hist":
            nulls.append(run_null_distribution(setting))
        elif setting.kind == "power":
            power.append(run_power(setting).assign(setting=setting.name))
        elif setting.kind == "remainder":
            remainder.append(remainder_frame(remainder_diagnostic(setting)).assign(setting=setting.name))
        else:
            curves.append(run_sparsity_curve(setting).assign(setting=setting.name))

    if coverage:
        frame = coverage_frame(coverage)
        bundle.add_frame("coverage_report.csv", frame)
        summary["coverage"] = [{"setting": rep.config["name"], "n_reps": rep.n_reps, "n_failed": rep.n_failed}
                               for rep in coverage]
        print(format_coverage_table(frame).to_string(index=False))
    if nulls:
        frames = [null.frame().assign(setting=null.config["name"], tau=null.tau, coord=null.coord)
                  for null in nulls]
        bundle.add_frame("null_stats.csv", pd.concat(frames, ignore_index=True))
        summary["null"] = [dict(null.summary(), setting=null.config["name"]) for null in nulls]
    if power:
        bundle.add_frame("power.csv", pd.concat(power, ignore_index=True))
    if remainder:
        bundle.add_frame("remainder.csv", pd.concat(remainder, ignore_index=True))
    if curves:
        bundle.add_frame("sparsity_curve.csv", pd.concat(curves, ignore_index=True))
    bundle.add_json("summary.json", summary)
    bundle.commit()
    return 0


def _range(text: str) -> Tuple[float, float]:
    lo, hi = _parse_pair(text, ":", "--trange")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise ConfigError(f"cannot parse --trange {text!r}")


def cmd_critvals(args) -> int:
    alpha = args.alpha if args.alpha is not None else TEST_ALPHA
    if args.kind == "z":
        value = normal_quantile(alpha)
    elif args.kind == "chi2":
        level = args.level if args.level is not None else 1.0 - alpha
        value = chi2_critical_value(args.d, 1.0 - level)
    elif args.kind == "kolmogorov":
        value = kolmogorov_sup_quantile(alpha)
    else:
        horizon = TauGrid.from_spec(args.grid) if args.grid else _range(args.trange)
        value = bessel_sup_quantile(args.d, horizon, alpha, seed=args.seed, n_paths=args.n_paths,
                                    n_steps=args.n_steps, functional=args.functional,
                                    workers=resolve_workers(args.threads))
    print(f"{value.value:.6f}")
    print(json.dumps(to_builtin(value.to_dict()), sort_keys=True))
    return 0


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--threads", type=int, default=None, help="worker count (default $HDQR_THREADS or 1)")
    parser.add_argument("--log-json", action="store_true", help="JSON log records on stderr")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _data_options(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="dataset CSV (y, x1..xp)")
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--tau-grid", default=None, help="lo:hi:step")
    parser.add_argument("--lambda0", type=float, default=None)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default=".", help="output directory")


def _estimation_options(parser: argparse.ArgumentParser):
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--c2", type=float, default=1.0, help="precision band constant")
    parser.add_argument("--c3", type=float, default=2.0, help="design bound constant")
    parser.add_argument("--h", type=float, default=None, help="sparsity bandwidth")
    parser.add_argument("--c4", type=float, default=0.4, help="bandwidth constant")
    parser.add_argument("--corrected", action="store_true", help="bias-corrected sparsity estimator")
    parser.add_argument("--known-sigma", default=None, help="closed-form sparsity of this error law")
    parser.add_argument("--s-grid-epsilon", type=float, default=0.05)
    parser.add_argument("--s-grid-step", type=float, default=0.005)
    parser.add_argument("--n-paths", type=int, default=DEFAULT_PATHS, help="bridge simulation paths")
    parser.add_argument("--n-steps", type=int, default=DEFAULT_STEPS, help="bridge simulation steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdqr", description="High-dimensional quantile regression inference")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="penalized quantile regression path")
    _data_options(fit)
    _common(fit)

    infer = sub.add_parser("infer", help="debiased estimates, intervals and bands")
    _data_options(infer)
    _estimation_options(infer)
    infer.add_argument("--x", "--e", dest="x", default=None, help="loading: eJ or comma-separated vector")
    infer.add_argument("--band", action="store_true", help="uniform band over the tau grid")
    infer.add_argument("--band-calibration", choices=CALIBRATIONS, default="studentized")
    _common(infer)

    test = sub.add_parser("test", help="Wald and sup-Wald tests of M beta(tau) = r")
    _data_options(test)
    _estimation_options(test)
    test.add_argument("--coef", action="append", default=[], help="j=value, repeatable")
    test.add_argument("--structural", default=None, help="k,j: beta_k(tau) = beta_j(tau)")
    test.add_argument("--dominance", default=None, help="j[,j...]: beta_j(tau) = 0")
    test.add_argument("--hypothesis", default=None, help="CSV with columns m0..mp, r")
    test.add_argument("--sup", action="store_true", help="sup-Wald over the tau grid")
    _common(test)

    simulate = sub.add_parser("simulate", help="Monte Carlo studies")
    simulate.add_argument("--preset", choices=sorted(PRESETS), default=None)
    simulate.add_argument("--config", default=None, help="JSON simulation config (object or list)")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--out", default=".", help="output directory")
    _common(simulate)

    critvals = sub.add_parser("critvals", help="critical values")
    critvals.add_argument("kind", choices=CRITVAL_KINDS)
    critvals.add_argument("--alpha", type=float, default=None)
    critvals.add_argument("--level", type=float, default=None, help="chi2 level, default 1 - alpha")
    critvals.add_argument("--d", type=int, default=1)
    critvals.add_argument("--trange", default="0:1", help="lo:hi range for bessel")
    critvals.add_argument("--grid", default=None, help="lo:hi:step grid for bessel (overrides --trange)")
    critvals.add_argument("--functional", choices=("norm", "qd", "qd2"), default="norm")
    critvals.add_argument("--seed", type=int, default=DEFAULT_SEED)
    critvals.add_argument("--n-paths", type=int, default=DEFAULT_PATHS)
    critvals.add_argument("--n-steps", type=int, default=DEFAULT_STEPS)
    _common(critvals)
    return parser


COMMANDS = {
    "fit": cmd_fit,
    "infer": cmd_infer,
    "test": cmd_test,
    "simulate": cmd_simulate,
    "critvals": cmd_critvals,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO, json_format=args.log_json)
    try:
        return COMMANDS[args.command](args)
    except HdqrError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except np.linalg.LinAlgError as e:
        logger.error(f"LinAlgError: {e}")
        return SolverError.exit_code


if __name__ == "__main__":
    sys.exit(main())
