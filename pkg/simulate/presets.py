# -*- coding: utf-8 -*-
# Named simulation settings. Each preset is a list of SimConfig fields, one entry per setting.
from typing import Any, Dict, List, Optional

from infrastructure.errors import ConfigError
from infrastructure.schemas import SimConfig

DESK = [
    {"name": "desk-eq-normal", "kind": "coverage", "n": 400, "p": 500, "covariance": "equicorrelation",
     "rho": 0.5, "error": "normal", "taus": [0.5], "coords": [1, 10, 20], "n_reps": 200},
    {"name": "desk-eq-t1", "kind": "coverage", "n": 400, "p": 500, "covariance": "equicorrelation",
     "rho": 0.5, "error": "t1", "taus": [0.5], "coords": [1, 10, 20], "n_reps": 200},
]

FULL_SCALE = [
    {"name": f"full-{cov[:2]}-{err}", "kind": "coverage", "n": 1000, "p": 1500, "covariance": cov,
     "rho": rho, "error": err, "taus": [0.3, 0.5, 0.6], "coords": [1, 10, 20], "n_reps": 500}
    for cov, rho in (("equicorrelation", 0.5), ("toeplitz", 0.1))
    for err in ("normal", "t1")
]

NULL_HIST = [
    {"name": f"null-{err}-{j}", "kind": "null-hist", "n": 400, "p": 500, "covariance": "equicorrelation",
     "rho": 0.5, "error": err, "taus": [0.5], "coords": [j], "n_reps": 200}
    for err in ("normal", "t1") for j in (1, 20)
]

POWER = [
    {"name": "power-eq-normal", "kind": "power", "n": 400, "p": 500, "covariance": "equicorrelation",
     "rho": 0.5, "error": "normal", "taus": [0.5], "test_coord": 20,
     "deltas": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], "test_alpha": 0.05, "sup_grid": "0.3:0.7:0.05",
     "n_reps": 200, "oracle": False},
]

REMAINDER = [
    {"name": "remainder-eq-normal", "kind": "remainder", "n": 200, "p": 250, "covariance": "equicorrelation",
     "rho": 0.5, "error": "normal", "n_ladder": [200, 400, 800], "p_ratio": 1.25,
     "remainder_grid": "0.3:0.7:0.1", "n_reps": 20, "oracle": False},
]

SPARSITY_CURVE = [
    {"name": "sparsity-curve", "kind": "sparsity-curve", "n": 400, "p": 500, "covariance": "equicorrelation",
     "rho": 0.5, "bandwidths": [0.05, 0.1, 0.15], "curve_grid": "0.2:0.8:0.05", "n_reps": 50,
     "oracle": False},
]

PRESETS: Dict[str, List[Dict[str, Any]]] = {
    "desk": DESK,
    "paper-scale": FULL_SCALE,
    "null-hist": NULL_HIST,
    "power": POWER,
    "remainder": REMAINDER,
    "sparsity-curve": SPARSITY_CURVE,
}


def build_settings(entries: List[Dict[str, Any]], seed: Optional[int] = None,
                   threads: Optional[int] = None) -> List[SimConfig]:
    """SimConfig per entry; ``seed`` and ``threads`` override every entry."""
    if not entries:
        raise ConfigError("no simulation settings given")
    settings = []
    for entry in entries:
        data = dict(entry)
        if seed is not None:
            data["seed"] = int(seed)
        if threads is not None:
            data["threads"] = int(threads)
        settings.append(SimConfig.from_dict(data))
    return settings


def preset_settings(name: str, seed: Optional[int] = None, threads: Optional[int] = None) -> List[SimConfig]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return build_settings(PRESETS[name], seed, threads)
