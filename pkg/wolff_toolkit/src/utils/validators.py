import math
from typing import Any, Dict

from .errors import DomainError, TaskDocumentError


def validate_exponent(p: float, n: int) -> None:
    if n < 2:
        raise DomainError("dimension n must be >= 2")
    if not (1.0 < p < n):
        raise DomainError(f"p must satisfy 1 < p < n (got p={p}, n={n})")


def validate_sublinear(q: float, p: float) -> None:
    if not (0.0 < q < p - 1.0):
        raise DomainError(f"q must satisfy 0 < q < p - 1 (got q={q}, p={p})")


def validate_positive(name: str, value: float) -> None:
    if not (value > 0.0) or math.isnan(value):
        raise DomainError(f"{name} must be positive (got {value})")


def validate_grid_dimension(n: int) -> None:
    if n not in (2, 3):
        raise DomainError(f"grid computations support n in {{2, 3}} (got {n})")


def validate_parameters(params: Dict[str, Any], required) -> None:
    for key in required:
        if key not in params:
            raise TaskDocumentError(f"Missing required parameter: {key}")
