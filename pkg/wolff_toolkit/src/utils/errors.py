"""Exception hierarchy shared by all modules.

Validation failures (bad documents, broken invariants, parameters outside a
module's preconditions) derive from ``ValueError``; numerical failures
(divergent integrals, non-converging solvers, failed self-checks) derive
from ``RuntimeError``. The CLI maps the two families to exit codes 2 and 3.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional


class ToolkitError(Exception):
    """Base class; ``payload`` is serialized into the CLI error file."""

    def payload(self) -> Dict[str, Any]:
        return {}


class ValidationFailure(ToolkitError, ValueError):
    pass


class MeasureParseError(ValidationFailure):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key

    def payload(self) -> Dict[str, Any]:
        return {"key": self.key}


class InvariantError(ValidationFailure):
    pass


class DomainError(ValidationFailure):
    pass


class TaskDocumentError(ValidationFailure):
    pass


class NumericalFailure(ToolkitError, RuntimeError):
    pass


class FinitenessError(NumericalFailure):
    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report

    def payload(self) -> Dict[str, Any]:
        return {"finiteness": self.report.to_dict()}


class DivergenceError(NumericalFailure):
    def __init__(self, message: str, iteration: int, sup_value: float):
        super().__init__(message)
        self.iteration = iteration
        self.sup_value = sup_value

    def payload(self) -> Dict[str, Any]:
        return {"iteration": self.iteration, "sup_value": self.sup_value}


class ConvergenceError(NumericalFailure):
    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])

    def payload(self) -> Dict[str, Any]:
        return {"residual_history": self.residual_history}


class PreconditionError(NumericalFailure):
    pass


class QuadratureError(NumericalFailure):
    pass


class IdentityCheckError(NumericalFailure):
    pass


class ContractionBoundError(NumericalFailure):
    def __init__(self, message: str, iteration: int, ln_rho: float, bound: float):
        super().__init__(message)
        self.iteration = iteration
        self.ln_rho = ln_rho
        self.bound = bound

    def payload(self) -> Dict[str, Any]:
        return {"iteration": self.iteration, "ln_rho": self.ln_rho, "bound": self.bound}


class BatteryFailure(NumericalFailure):
    def __init__(self, message: str, summary: Any):
        super().__init__(message)
        self.summary = summary

    def payload(self) -> Dict[str, Any]:
        return {"summary": self.summary.to_dict()}
