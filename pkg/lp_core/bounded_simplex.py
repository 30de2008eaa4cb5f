# -*- coding: utf-8 -*-
# Dense bounded-variable revised simplex.
#
# Standard form used internally: every row i gets a slack column e_i whose
# bounds encode the relation (<= : [0, inf), >= : (-inf, 0], = : [0, 0]) and
# an artificial column +-e_i that only lives during phase 1. Slack and
# artificial columns are never materialized.
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

logger = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"

LE, EQ, GE = "<=", "=", ">="
_RELATION_ALIASES = {"<=": LE, "≤": LE, "=": EQ, "==": EQ, ">=": GE, "≥": GE}

BASIC, AT_LOWER, AT_UPPER, FREE_ZERO = 0, 1, 2, 3

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERACY_LIMIT = 50


@dataclass(eq=False)
class LpProblem:
    """
    min/max cost @ x subject to rows (A[i] @ x  rel_i  rhs[i]) and lower <= x <= upper.
    """
    objective_sense: str
    cost: np.ndarray
    A: np.ndarray
    relations: List[str]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.objective_sense not in ("min", "max"):
            raise ValueError(f"objective_sense must be 'min' or 'max', got {self.objective_sense!r}")
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        v = self.cost.shape[0]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, v)
        m = self.A.shape[0]
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        if self.rhs.shape[0] != m:
            raise ValueError(f"{m} rows but {self.rhs.shape[0]} right-hand sides")
        if len(self.relations) != m:
            raise ValueError(f"{m} rows but {len(self.relations)} relations")
        try:
            self.relations = [_RELATION_ALIASES[r] for r in self.relations]
        except KeyError as e:
            raise ValueError(f"unknown row relation {e.args[0]!r}")
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (v,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (v,)).copy()
        if np.any(self.lower > self.upper):
            bad = np.flatnonzero(self.lower > self.upper).tolist()
            raise ValueError(f"lower > upper for variables {bad}")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("bounds must not pin a variable at infinity")

    @classmethod
    def from_rows(cls, objective_sense: str, cost: Sequence[float],
                  rows: Iterable[Tuple[Sequence[float], str, float]],
                  var_bounds: Sequence[Tuple[float, float]]) -> "LpProblem":
        """Builds a problem from (coefficients, relation, rhs) triples."""
        rows = list(rows)
        v = len(cost)
        for coeffs, _, _ in rows:
            if len(coeffs) != v:
                raise ValueError(f"row has {len(coeffs)} coefficients, expected {v}")
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), v)
        bounds = np.array(var_bounds, dtype=float).reshape(v, 2)
        return cls(objective_sense, cost, A, [r[1] for r in rows],
                   [r[2] for r in rows], bounds[:, 0], bounds[:, 1])

    @property
    def num_vars(self) -> int:
        return int(self.cost.shape[0])

    @property
    def num_rows(self) -> int:
        return int(self.A.shape[0])

    def rows(self):
        for i in range(self.num_rows):
            yield self.A[i], self.relations[i], float(self.rhs[i])


@dataclass(eq=False)
class Basis:
    """Warm-start basis over structural + slack columns."""
    basic: np.ndarray
    at_upper: np.ndarray


@dataclass(eq=False)
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    row_duals: np.ndarray
    reduced_costs: np.ndarray
    basis: Optional[Basis] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class BoundedSimplex:
    """
    Revised simplex with explicit bounds, an explicit basis inverse kept
    current by eta updates and refactorized with LU every REFACTOR_EVERY
    pivots. Dantzig pricing; Bland's rule after DEGENERACY_LIMIT consecutive
    degenerate steps, until the next nondegenerate one.
    """

    def __init__(self, problem: LpProblem, tol_feas: float = 1e-9, tol_cost: float = 1e-9,
                 max_iters: Optional[int] = None):
        if tol_feas <= 0 or tol_cost <= 0:
            raise ValueError("tolerances must be positive")
        self.problem = problem
        self.tol_feas = float(tol_feas)
        self.tol_cost = float(tol_cost)
        self.A = problem.A
        self.m, self.v = problem.A.shape
        m, v = self.m, self.v
        self.N = v + 2 * m
        self.max_iters = int(max_iters) if max_iters is not None else 50 * (v + m)
        self.sign = -1.0 if problem.objective_sense == "max" else 1.0

        self.cost = np.zeros(self.N)
        self.cost[:v] = self.sign * problem.cost
        self.rhs = problem.rhs

        self.lo = np.zeros(self.N)
        self.hi = np.zeros(self.N)
        self.lo[:v] = problem.lower
        self.hi[:v] = problem.upper
        for i, rel in enumerate(problem.relations):
            if rel == LE:
                self.hi[v + i] = np.inf
            elif rel == GE:
                self.lo[v + i] = -np.inf
        self.art_sign = np.ones(m)

        self.x = np.zeros(self.N)
        self.state = np.full(self.N, AT_LOWER, dtype=int)
        self.basic = np.arange(v, v + m)
        self.B_inv = np.eye(m)
        self.iterations = 0
        self._since_refactor = 0

    # -------------------------
    # column algebra
    def _column(self, j: int) -> np.ndarray:
        if j < self.v:
            return self.A[:, j]
        col = np.zeros(self.m)
        if j < self.v + self.m:
            col[j - self.v] = 1.0
        else:
            col[j - self.v - self.m] = self.art_sign[j - self.v - self.m]
        return col

    def _basis_matrix(self, basic: np.ndarray) -> np.ndarray:
        B = np.zeros((self.m, self.m))
        for pos, j in enumerate(basic):
            B[:, pos] = self._column(int(j))
        return B

    def _row_activity(self, x: np.ndarray) -> np.ndarray:
        v, m = self.v, self.m
        return self.A @ x[:v] + x[v:v + m] + self.art_sign * x[v + m:]

    def _reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        v, m = self.v, self.m
        d = np.empty(self.N)
        d[:v] = cost[:v] - self.A.T @ y
        d[v:v + m] = cost[v:v + m] - y
        d[v + m:] = cost[v + m:] - self.art_sign * y
        return d

    def _rest(self, j: int, prefer_upper: bool = False) -> Tuple[float, int]:
        lo, hi = self.lo[j], self.hi[j]
        if prefer_upper and np.isfinite(hi):
            return hi, AT_UPPER
        if np.isfinite(lo):
            return lo, AT_LOWER
        if np.isfinite(hi):
            return hi, AT_UPPER
        return 0.0, FREE_ZERO

    def _refactor(self):
        m = self.m
        self._since_refactor = 0
        if m == 0:
            self.B_inv = np.zeros((0, 0))
            return
        lu = lu_factor(self._basis_matrix(self.basic), check_finite=False)
        self.B_inv = lu_solve(lu, np.eye(m), check_finite=False)
        x = self.x.copy()
        x[self.basic] = 0.0
        self.x[self.basic] = self.B_inv @ (self.rhs - self._row_activity(x))

    # -------------------------
    # starting bases
    def _place_nonbasics(self, at_upper: Optional[np.ndarray]):
        v, m = self.v, self.m
        for j in range(v + m):
            prefer = bool(at_upper[j]) if at_upper is not None else False
            self.x[j], self.state[j] = self._rest(j, prefer)
        self.hi[v + m:] = 0.0
        self.x[v + m:] = 0.0
        self.state[v + m:] = AT_LOWER

    def _try_warm(self, basis: Basis) -> bool:
        v, m = self.v, self.m
        basic = np.asarray(basis.basic, dtype=int).ravel()
        at_upper = np.asarray(basis.at_upper, dtype=bool).ravel()
        if basic.shape[0] != m or at_upper.shape[0] != v + m:
            return False
        if np.any(basic < 0) or np.any(basic >= v + m) or np.unique(basic).shape[0] != m:
            return False
        self._place_nonbasics(at_upper)
        self.basic = basic.copy()
        self.state[basic] = BASIC
        if m:
            B = self._basis_matrix(basic)
            lu = lu_factor(B, check_finite=False)
            diag = np.abs(np.diag(lu[0]))
            if diag.min() <= 1e-11 * max(1.0, diag.max()):
                return False
            self.B_inv = lu_solve(lu, np.eye(m), check_finite=False)
        x = self.x.copy()
        x[basic] = 0.0
        xb = self.B_inv @ (self.rhs - self._row_activity(x)) if m else np.zeros(0)
        lo, hi = self.lo[basic], self.hi[basic]
        if np.any(xb < lo - self.tol_feas) or np.any(xb > hi + self.tol_feas):
            return False
        self.x[basic] = np.clip(xb, lo, hi)
        self._since_refactor = 0
        return True

    def _crash(self, at_upper: Optional[np.ndarray]) -> np.ndarray:
        """
        Slack / singleton-column crash. Returns the rows that needed an
        artificial variable (empty when the crash basis is already feasible).
        """
        v, m = self.v, self.m
        self._place_nonbasics(at_upper)
        residual = self.rhs - self._row_activity(self.x)

        singles = {}
        if v and m:
            nz = self.A != 0.0
            counts = nz.sum(axis=0)
            for j in np.flatnonzero(counts == 1):
                singles.setdefault(int(np.argmax(nz[:, j])), []).append(int(j))

        basic = np.empty(m, dtype=int)
        diag = np.ones(m)
        artificial_rows = []
        for i in range(m):
            slack = v + i
            val = self.x[slack] + residual[i]
            if self.lo[slack] - self.tol_feas <= val <= self.hi[slack] + self.tol_feas:
                chosen, coef = slack, 1.0
            else:
                chosen, coef = -1, 1.0
                for j in singles.get(i, ()):
                    a = self.A[i, j]
                    cand = self.x[j] + residual[i] / a
                    if self.lo[j] - self.tol_feas <= cand <= self.hi[j] + self.tol_feas:
                        chosen, coef, val = j, a, cand
                        break
                if chosen < 0:
                    chosen = v + m + i
                    self.art_sign[i] = 1.0 if residual[i] >= 0 else -1.0
                    coef = self.art_sign[i]
                    val = abs(residual[i])
                    self.hi[chosen] = np.inf
                    artificial_rows.append(i)
            self.x[chosen] = np.clip(val, self.lo[chosen], self.hi[chosen])
            self.state[chosen] = BASIC
            basic[i] = chosen
            diag[i] = coef
        self.basic = basic
        self.B_inv = np.diag(1.0 / diag) if m else np.zeros((0, 0))
        self._since_refactor = 0
        return np.asarray(artificial_rows, dtype=int)

    def _retire_artificials(self):
        art = slice(self.v + self.m, self.N)
        self.hi[art] = 0.0
        self.x[art] = 0.0
        if self.m:
            self._refactor()

    # -------------------------
    # iterations
    def _price(self, d: np.ndarray, bland: bool) -> Tuple[int, int]:
        state = self.state
        movable = (state != BASIC) & (self.hi > self.lo)
        up = movable & ((state == AT_LOWER) | (state == FREE_ZERO)) & (d < -self.tol_cost)
        down = movable & ((state == AT_UPPER) | (state == FREE_ZERO)) & (d > self.tol_cost)
        candidates = np.flatnonzero(up | down)
        if candidates.size == 0:
            return -1, 0
        if bland:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmax(np.abs(d[candidates]))])
        return j, (1 if up[j] else -1)

    def _ratio_test(self, entering: int, direction: int, alpha: np.ndarray,
                    bland: bool) -> Tuple[float, int, np.ndarray]:
        delta = -direction * alpha
        basic = self.basic
        xb, lob, hib = self.x[basic], self.lo[basic], self.hi[basic]
        ratios = np.full(self.m, np.inf)
        dec = (delta < -PIVOT_TOL) & np.isfinite(lob)
        inc = (delta > PIVOT_TOL) & np.isfinite(hib)
        ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
        ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
        ratios = np.maximum(ratios, 0.0)

        own = self.hi[entering] - self.lo[entering]
        best = ratios.min() if self.m else np.inf
        if own <= best:
            return own, -1, delta
        if not np.isfinite(best):
            return np.inf, -1, delta
        ties = np.flatnonzero(ratios <= best + 1e-12 + 1e-9 * best)
        if bland:
            pos = int(ties[np.argmin(basic[ties])])
        else:
            pos = int(ties[np.argmax(np.abs(alpha[ties]))])
        return best, pos, delta

    def _move(self, entering: int, direction: int, alpha: np.ndarray, delta: np.ndarray,
              step: float, pos: int):
        x = self.x
        if step > 0:
            x[entering] += direction * step
            x[self.basic] += delta * step
        if pos < 0:
            if direction > 0:
                x[entering], self.state[entering] = self.hi[entering], AT_UPPER
            else:
                x[entering], self.state[entering] = self.lo[entering], AT_LOWER
            return

        leaving = int(self.basic[pos])
        if delta[pos] < 0 or self.lo[leaving] == self.hi[leaving]:
            x[leaving], self.state[leaving] = self.lo[leaving], AT_LOWER
        else:
            x[leaving], self.state[leaving] = self.hi[leaving], AT_UPPER
        self.basic[pos] = entering
        self.state[entering] = BASIC

        row = self.B_inv[pos] / alpha[pos]
        self.B_inv -= np.outer(alpha, row)
        self.B_inv[pos] = row
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def _iterate(self, cost: np.ndarray) -> str:
        bland = False
        degenerate_run = 0
        while True:
            if self.iterations >= self.max_iters:
                return ITERATION_LIMIT
            y = self.B_inv.T @ cost[self.basic] if self.m else np.zeros(0)
            d = self._reduced_costs(cost, y)
            entering, direction = self._price(d, bland)
            if entering < 0:
                return OPTIMAL
            alpha = self.B_inv @ self._column(entering) if self.m else np.zeros(0)
            step, pos, delta = self._ratio_test(entering, direction, alpha, bland)
            if not np.isfinite(step):
                return UNBOUNDED
            self._move(entering, direction, alpha, delta, step, pos)
            self.iterations += 1
            if step <= self.tol_feas:
                degenerate_run += 1
                if degenerate_run >= DEGENERACY_LIMIT and not bland:
                    logger.debug(f"degenerate stall after {self.iterations} iterations; switching to Bland's rule")
                    bland = True
            else:
                degenerate_run = 0
                bland = False

    # -------------------------
    def solve(self, warm_start: Optional[Basis] = None) -> LpSolution:
        warm = warm_start is not None and self._try_warm(warm_start)
        if warm_start is not None and not warm:
            logger.debug("warm-start basis infeasible or singular; crashing from its bound positions")
        if not warm:
            at_upper = np.asarray(warm_start.at_upper, dtype=bool) if warm_start is not None else None
            if at_upper is not None and at_upper.shape[0] != self.v + self.m:
                at_upper = None
            artificial_rows = self._crash(at_upper)
            if artificial_rows.size:
                phase1 = np.zeros(self.N)
                phase1[self.v + self.m + artificial_rows] = 1.0
                status = self._iterate(phase1)
                if status != OPTIMAL:
                    return self._result(ITERATION_LIMIT if status == ITERATION_LIMIT else INFEASIBLE)
                if self._since_refactor:
                    self._refactor()
                infeasibility = float(self.x[self.v + self.m:].sum())
                if infeasibility > 1e3 * self.tol_feas * (1.0 + float(np.abs(self.rhs).max(initial=0.0))):
                    return self._result(INFEASIBLE)
            self._retire_artificials()
        status = self._iterate(self.cost)
        return self._result(status)

    def _result(self, status: str) -> LpSolution:
        v, m = self.v, self.m
        problem = self.problem
        if status == OPTIMAL and self._since_refactor and m:
            self._refactor()
        x = np.clip(self.x[:v], problem.lower, problem.upper)
        if status != OPTIMAL:
            if status != INFEASIBLE:
                logger.warning(f"LP finished with status {status} after {self.iterations} iterations")
            return LpSolution(status=status, x=x, objective=float("nan"),
                              row_duals=np.zeros(m), reduced_costs=np.zeros(v),
                              basis=None, iterations=self.iterations)

        y = self.B_inv.T @ self.cost[self.basic] if m else np.zeros(0)
        d = self._reduced_costs(self.cost, y)
        basis = None
        if np.all(self.basic < v + m):
            basis = Basis(basic=self.basic.copy(), at_upper=(self.state[:v + m] == AT_UPPER))
        return LpSolution(status=OPTIMAL, x=x, objective=float(problem.cost @ x),
                          row_duals=self.sign * y, reduced_costs=self.sign * d[:v],
                          basis=basis, iterations=self.iterations)


def solve_bounded_lp(problem: LpProblem, tol_feas: float = 1e-9, tol_cost: float = 1e-9,
                     max_iters: Optional[int] = None, warm_start: Optional[Basis] = None) -> LpSolution:
    """
    Solves ``problem`` exactly at a vertex.

    Args:
        problem: the LP.
        tol_feas: primal feasibility tolerance.
        tol_cost: reduced-cost optimality tolerance.
        max_iters: pivot + bound-flip budget over both phases; 50 * (v + rows) by default.
        warm_start: basis from a previous solve of a problem with the same shape.

    Returns:
        LpSolution; non-Optimal outcomes are statuses, never exceptions.
    """
    return BoundedSimplex(problem, tol_feas, tol_cost, max_iters).solve(warm_start)


def dual_objective(problem: LpProblem, solution: LpSolution) -> float:
    """rhs @ y plus the bound multipliers' contribution at the active bounds."""
    return float(problem.rhs @ solution.row_duals + solution.reduced_costs @ solution.x)
