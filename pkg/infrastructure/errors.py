# -*- coding: utf-8 -*-
# Exception hierarchy shared by the estimators and the command line.


class HdqrError(Exception):
    """Base class for every error raised by the hdqr packages."""

    exit_code = 1


class DataFormatError(HdqrError, ValueError):
    """Dataset could not be parsed or violates the Dataset invariants."""

    exit_code = 2


class ConfigError(HdqrError, ValueError):
    """A run or simulation configuration is outside its preconditions."""

    exit_code = 2


class SolverError(HdqrError):
    """An LP finished with a status other than Optimal where one was required."""

    exit_code = 3

    def __init__(self, message: str, status: str = ""):
        super().__init__(message)
        self.status = status


class InfeasibleColumnError(SolverError):
    """A precision column program is infeasible.

    ``offending`` names the parameter to relax: ``"gamma"`` when the
    covariance band alone is infeasible, ``"L"`` when the design bound is.
    """

    def __init__(self, column: int, offending: str):
        super().__init__(f"precision column {column} infeasible (relax {offending})", "Infeasible")
        self.column = column
        self.offending = offending


class PrecisionError(SolverError):
    """Precision estimation failed after exhausting tuning escalations."""


class BandwidthError(HdqrError, ValueError):
    """Sparsity bandwidth window is not admissible at the requested tau."""

    exit_code = 4

    def __init__(self, message: str, tau: float = float("nan")):
        super().__init__(message)
        self.tau = tau


class SingularSandwichError(HdqrError):
    """Wald sandwich matrix is singular; ``rows`` lists the dependent rows of M."""

    exit_code = 5

    def __init__(self, message: str, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class SimulationError(HdqrError):
    """Too many Monte Carlo replications failed."""

    exit_code = 3
