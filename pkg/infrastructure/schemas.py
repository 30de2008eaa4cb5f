# -*- coding: utf-8 -*-
# Domain records shared by the estimators, the simulation harness and the CLI.
import math
from dataclasses import dataclass, field, asdict, fields
from typing import List, Dict, Any, Optional, Tuple

import numpy as np

from infrastructure.errors import ConfigError, DataFormatError

GRID_DECIMALS = 12


def to_builtin(value: Any) -> Any:
    """Recursively converts numpy containers/scalars into JSON-ready builtins."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(eq=False)
class Dataset:
    """
    Response vector and design matrix with the intercept in column 0.
    """
    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        n = self.Y.shape[0]
        if n < 2:
            raise DataFormatError(f"need at least 2 observations, got {n}")
        if self.X.shape[0] != n:
            raise DataFormatError(f"X has {self.X.shape[0]} rows but Y has {n}")
        if not (np.all(np.isfinite(self.Y)) and np.all(np.isfinite(self.X))):
            raise DataFormatError("dataset contains NaN or infinite entries")
        if not np.all(self.X[:, 0] == 1.0):
            raise DataFormatError("column 0 of X must be the all-ones intercept")
        constant = [j for j in range(1, self.X.shape[1]) if np.ptp(self.X[:, j]) == 0.0]
        if constant:
            raise DataFormatError(f"constant covariate columns: {constant}")

    @classmethod
    def from_covariates(cls, y, Z) -> "Dataset":
        """Builds a Dataset from covariates without the intercept column."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        ones = np.ones((Z.shape[0], 1))
        return cls(Y=y, X=np.hstack([ones, Z]))

    @property
    def n(self) -> int:
        return int(self.Y.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1] - 1)


@dataclass(eq=False)
class TauGrid:
    """
    Uniform grid of quantile levels inside [epsilon, 1 - epsilon].
    """
    epsilon: float
    points: np.ndarray

    def __post_init__(self):
        self.points = np.round(np.atleast_1d(np.asarray(self.points, dtype=float)), GRID_DECIMALS)
        eps = float(self.epsilon)
        if not 0.0 < eps < 0.5:
            raise ConfigError(f"grid epsilon must lie in (0, 0.5), got {eps}")
        if self.points.size == 0:
            raise ConfigError("grid has no points")
        if np.any(self.points < eps - 1e-12) or np.any(self.points > 1.0 - eps + 1e-12):
            raise ConfigError(f"grid points must lie in [{eps}, {1 - eps}]")
        if self.points.size > 1:
            steps = np.diff(self.points)
            if np.any(steps <= 0):
                raise ConfigError("grid points must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=0.0, atol=1e-9):
                raise ConfigError("grid spacing must be uniform")

    @classmethod
    def symmetric(cls, epsilon: float = 0.05, step: float = 0.005) -> "TauGrid":
        """Default constructor: epsilon, epsilon + step, ..., 1 - epsilon."""
        return cls.span(epsilon, 1.0 - epsilon, step, epsilon=epsilon)

    @classmethod
    def span(cls, lo: float, hi: float, step: float, epsilon: Optional[float] = None) -> "TauGrid":
        if step <= 0:
            raise ConfigError(f"grid step must be positive, got {step}")
        if hi < lo:
            raise ConfigError(f"grid upper end {hi} is below lower end {lo}")
        count = int(round((hi - lo) / step))
        if abs(lo + count * step - hi) > 1e-9:
            raise ConfigError(f"grid {lo}:{hi} is not a whole number of steps of {step}")
        points = lo + step * np.arange(count + 1)
        eps = min(lo, 1.0 - hi) if epsilon is None else epsilon
        return cls(epsilon=eps, points=points)

    @classmethod
    def single(cls, tau: float) -> "TauGrid":
        if not 0.0 < tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {tau}")
        return cls(epsilon=min(tau, 1.0 - tau, 0.25), points=[tau])

    @classmethod
    def from_spec(cls, text: str) -> "TauGrid":
        """Parses ``lo:hi:step`` (or a single number) as used on the command line."""
        parts = [s.strip() for s in str(text).split(":")]
        try:
            values = [float(s) for s in parts]
        except ValueError:
            raise ConfigError(f"cannot parse tau grid {text!r}")
        if len(values) == 1:
            return cls.single(values[0])
        if len(values) != 3:
            raise ConfigError(f"tau grid must be lo:hi:step, got {text!r}")
        return cls.span(*values)

    @property
    def step(self) -> float:
        if self.points.size < 2:
            return 0.0
        return float(round(self.points[1] - self.points[0], GRID_DECIMALS))

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    def index_of(self, tau: float, tol: float = 1e-9) -> int:
        idx = int(np.argmin(np.abs(self.points - tau)))
        if abs(self.points[idx] - tau) > tol:
            raise ConfigError(f"tau={tau} is not a grid point")
        return idx

    def contains(self, tau: float, tol: float = 1e-9) -> bool:
        return bool(np.min(np.abs(self.points - tau)) <= tol)

    def __len__(self) -> int:
        return int(self.points.size)

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilon": self.epsilon, "step": self.step, "points": self.points.tolist()}


@dataclass(eq=False)
class QuantileFit:
    """
    Penalized (or oracle) quantile regression solution at one tau.
    """
    tau: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    penalties: np.ndarray
    lp_status: str
    row_duals: np.ndarray = field(default=None, repr=False)
    support: Optional[Tuple[int, ...]] = None
    iterations: int = 0
    basis: Any = field(default=None, repr=False)

    @property
    def subgradient(self) -> np.ndarray:
        """Check-loss subgradient selection psi~ recovered from the LP row duals."""
        return self.residuals.shape[0] * self.row_duals

    def to_dict(self) -> Dict[str, Any]:
        return to_builtin({
            "tau": self.tau,
            "beta": self.beta,
            "objective": self.objective,
            "penalties": [p if math.isfinite(p) else "inf" for p in self.penalties],
            "lp_status": self.lp_status,
            "support": self.support,
            "iterations": self.iterations,
        })


@dataclass(eq=False)
class QuantilePath:
    grid: TauGrid
    fits: List[QuantileFit]

    def __post_init__(self):
        if len(self.fits) != len(self.grid):
            raise ValueError("one fit per grid point is required")
        for point, fit in zip(self.grid.points, self.fits):
            if abs(fit.tau - point) > 1e-12:
                raise ValueError(f"fit at tau={fit.tau} does not match grid point {point}")

    @property
    def betas(self) -> np.ndarray:
        return np.vstack([f.beta for f in self.fits])

    def fit_at(self, tau: float) -> QuantileFit:
        return self.fits[self.grid.index_of(tau)]


@dataclass
class ColumnRecord:
    """Feasibility/escalation record of one precision column program."""
    column: int
    gamma: float
    L: float
    escalations: int
    l1_norm: float
    design_rows_used: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class PrecisionEstimate:
    D_hat: np.ndarray
    gamma_n: float
    L_n: float
    column_log: List[ColumnRecord]
    Sigma_hat: np.ndarray
    D_columns: np.ndarray = field(default=None, repr=False)

    @property
    def escalated_columns(self) -> List[int]:
        return [rec.column for rec in self.column_log if rec.escalations > 0]

    def sandwich(self) -> np.ndarray:
        """D Sigma D, the covariance kernel of the debiased estimator."""
        return self.D_hat @ self.Sigma_hat @ self.D_hat

    def to_dict(self) -> Dict[str, Any]:
        return to_builtin({
            "gamma_n": self.gamma_n,
            "L_n": self.L_n,
            "escalated_columns": self.escalated_columns,
            "columns": [rec.to_dict() for rec in self.column_log],
        })


@dataclass(eq=False)
class RankScores:
    tau: float
    xi: np.ndarray
    lambda_n: np.ndarray
    kind: str  # "Penalized" or "Oracle"
    objective: float = 0.0
    support: Optional[Tuple[int, ...]] = None
    lp_status: str = "Optimal"
    basis: Any = field(default=None, repr=False)


@dataclass(eq=False)
class ScalePath:
    """
    Scale rank statistic S_n over a fine grid.

    ``unwound`` holds T_n, the path with the sign function integrated back
    out; its second derivative is the sparsity function on both sides of 1/2.
    """
    grid: TauGrid
    S_values: np.ndarray
    xi_path: np.ndarray
    unwound: np.ndarray
    kind: str = "Penalized"
    method: str = "primal"

    def value_at(self, tau: float) -> float:
        return float(self.S_values[self.grid.index_of(tau)])


@dataclass
class SparsityEstimate:
    tau: float
    value: float
    h: float
    corrected: bool
    raw: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class DebiasedPath:
    grid: TauGrid
    beta_check: np.ndarray
    sparsity_used: np.ndarray
    precision: PrecisionEstimate = field(repr=False)
    n: int
    beta_hat: np.ndarray = field(default=None, repr=False)
    mode: str = "estimated"
    h: Optional[float] = None

    def __post_init__(self):
        self.beta_check = np.atleast_2d(np.asarray(self.beta_check, dtype=float))
        self.sparsity_used = np.atleast_1d(np.asarray(self.sparsity_used, dtype=float))
        if self.beta_check.shape[0] != len(self.grid):
            raise ValueError("beta_check needs one row per grid point")
        if not np.all(np.isfinite(self.beta_check)):
            raise ValueError("debiased path has non-finite entries")

    def at(self, tau: float) -> Tuple[np.ndarray, float]:
        k = self.grid.index_of(tau)
        return self.beta_check[k], float(self.sparsity_used[k])


@dataclass
class CriticalValue:
    kind: str
    alpha: float
    value: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return to_builtin(asdict(self))


@dataclass
class ConfidenceInterval:
    tau: float
    estimate: float
    lower: float
    upper: float
    half_width: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class ConfidenceBand:
    loading: np.ndarray
    intervals: List[ConfidenceInterval]
    critical_value: CriticalValue
    covered: Optional[bool] = None
    label: str = ""


@dataclass(eq=False)
class TestResult:
    statistic: float
    critical_value: CriticalValue
    p_value: float
    reject: bool
    taus: List[float]
    M: np.ndarray
    r: np.ndarray
    per_tau: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return to_builtin({
            "statistic": self.statistic,
            "critical_value": self.critical_value.to_dict(),
            "p_value": self.p_value,
            "reject": self.reject,
            "taus": self.taus,
            "per_tau_statistic": self.per_tau,
            "M": self.M,
            "r": self.r,
        })


SIM_KINDS = ("coverage", "null-hist", "power", "remainder", "sparsity-curve")


@dataclass
class SimConfig:
    """
    One Monte Carlo setting (design x error law) and the estimator options.
    """
    name: str = "desk"
    kind: str = "coverage"
    n: int = 400
    p: int = 500
    s: int = 10
    covariance: str = "equicorrelation"
    rho: float = 0.5
    error: str = "normal"
    taus: List[float] = field(default_factory=lambda: [0.5])
    coords: List[int] = field(default_factory=lambda: [1, 10, 20])
    n_reps: int = 200
    seed: int = 2024
    alpha: float = 0.025
    lambda0: Optional[float] = None
    c2: float = 1.0
    c3: float = 2.0
    h: Optional[float] = None
    c4: float = 0.4
    s_grid_epsilon: float = 0.05
    s_grid_step: float = 0.005
    oracle: bool = True
    threads: Optional[int] = None
    n_ladder: List[int] = field(default_factory=lambda: [200, 400, 800])
    p_ratio: float = 1.25
    remainder_grid: str = "0.3:0.7:0.1"
    test_coord: int = 20
    deltas: List[float] = field(default_factory=lambda: [0.0])
    test_alpha: float = 0.05
    sup_grid: str = "0.3:0.7:0.05"
    bandwidths: List[float] = field(default_factory=lambda: [0.05, 0.1, 0.15])
    curve_grid: str = "0.2:0.8:0.05"
    bessel_paths: int = 100000
    bessel_steps: int = 1000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in SIM_KINDS:
            raise ConfigError(f"unknown simulation kind {self.kind!r}; expected one of {SIM_KINDS}")
        if self.n < 20:
            raise ConfigError(f"n must be at least 20, got {self.n}")
        if self.p < self.s or self.s < 1:
            raise ConfigError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        if self.n_reps < 1:
            raise ConfigError(f"n_reps must be at least 1, got {self.n_reps}")
        if self.covariance not in ("equicorrelation", "toeplitz"):
            raise ConfigError(f"unknown covariance {self.covariance!r}")
        if not -1.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.covariance == "equicorrelation" and self.rho < 0:
            raise ConfigError("one-factor equicorrelation sampling needs rho >= 0")
        if any(not 0.0 < t < 1.0 for t in self.taus):
            raise ConfigError(f"taus must lie in (0, 1): {self.taus}")
        if any(j < 0 or j > self.p for j in self.coords) or not 0 <= self.test_coord <= self.p:
            raise ConfigError(f"coordinates must lie in [0, {self.p}]")
        if not 0.0 < self.alpha < 0.5 or not 0.0 < self.test_alpha < 0.5:
            raise ConfigError("alpha levels must lie in (0, 0.5)")
        if self.lambda0 is not None and self.lambda0 < 0:
            raise ConfigError("lambda0 must be nonnegative")
        if self.c2 <= 0 or self.c3 <= 0 or self.c4 <= 0:
            raise ConfigError("tuning constants c2, c3, c4 must be positive")
        if self.h is not None and self.h <= 0:
            raise ConfigError("bandwidth h must be positive")
        if any(m < 20 for m in self.n_ladder):
            raise ConfigError("every n in the ladder must be at least 20")
        if self.bessel_paths < 100 or self.bessel_steps < 10:
            raise ConfigError("bridge simulation needs at least 100 paths and 10 steps")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown simulation config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid simulation config: {e}")

    def replace(self, **changes) -> "SimConfig":
        data = asdict(self)
        data.update(changes)
        return SimConfig(**data)

    @property
    def setting_label(self) -> str:
        cov = "EQ" if self.covariance == "equicorrelation" else "Toeplitz"
        return f"{cov}({self.rho:g}), {self.error}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CoverageCell:
    setting: str
    tau: float
    coord: int
    method: str
    coverage: float
    mc_se: float
    mean_sqrt_n_width: float
    n_ok: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CoverageReport:
    cells: List[CoverageCell]
    n_reps: int
    n_failed: int
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return to_builtin(asdict(self))


@dataclass
class RemainderRow:
    n: int
    p: int
    mode: str
    median_sup_remainder: float
    median_rank_score_gap: float
    seeds: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RemainderDiagnostic:
    rows: List[RemainderRow]

    def __post_init__(self):
        for row in self.rows:
            if not math.isfinite(row.median_sup_remainder):
                raise ValueError(f"non-finite remainder at n={row.n} ({row.mode})")

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": [r.to_dict() for r in self.rows]}


@dataclass
class RunConfig:
    """
    Validated command-line options; every check runs before any compute.
    """
    command: str
    data_path: Optional[str] = None
    tau: Optional[float] = None
    tau_grid: Optional[str] = None
    alpha: float = 0.025
    lambda0: Optional[float] = None
    c2: float = 1.0
    c3: float = 2.0
    h: Optional[float] = None
    c4: float = 0.4
    seed: int = 0xC0FFEE
    out_dir: str = "."
    threads: int = 1
    corrected: bool = False
    known_sigma: Optional[str] = None
    s_grid_epsilon: float = 0.05
    s_grid_step: float = 0.005
    log_json: bool = False

    def __post_init__(self):
        if self.tau is not None and self.tau_grid is not None:
            raise ConfigError("use either --tau or --tau-grid, not both")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ConfigError(f"--tau must lie in (0, 1), got {self.tau}")
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"--alpha must lie in (0, 0.5), got {self.alpha}")
        if self.lambda0 is not None and self.lambda0 < 0:
            raise ConfigError("--lambda0 must be nonnegative")
        if self.c2 <= 0 or self.c3 <= 0 or self.c4 <= 0:
            raise ConfigError("tuning constants must be positive")
        if self.h is not None and self.h <= 0:
            raise ConfigError("--h must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if not 0.0 < self.s_grid_epsilon < 0.5 or self.s_grid_step <= 0:
            raise ConfigError("invalid sparsity grid")
        if self.tau_grid is not None:
            self.grid()

    def grid(self) -> TauGrid:
        if self.tau_grid is not None:
            return TauGrid.from_spec(self.tau_grid)
        return TauGrid.single(0.5 if self.tau is None else self.tau)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
