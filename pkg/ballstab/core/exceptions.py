"""Exceptions module.

Exit-code taxonomy used by the CLI:
    1 - ConfigValidationError, DomainError
    2 - GuardViolation (and subclasses)
    3 - NumericalFailure (and subclasses), OrderBelowThreshold
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from ..models.schemas import GuardReport, Violation


class BallStabException(Exception):
    """Base exception for ballstab operations"""
    exit_code = 1


class DomainError(BallStabException, ValueError):
    """Argument outside the domain of an operation (negative density, negative time, ...)."""
    exit_code = 1


class ConfigValidationError(BallStabException):
    """Configuration failed type coercion or hypothesis checks.

    Carries every violation found, not only the first one.
    """
    exit_code = 1

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        lines = "; ".join(f"{v.field}: {v.cited}" for v in self.violations)
        super().__init__(f"{len(self.violations)} configuration violation(s): {lines}")


# ===== Guards =====

class GuardViolation(BallStabException):
    """A run-level guard rejected a state before it was emitted."""
    exit_code = 2
    guard = "guard"

    def __init__(self, message: str, t: float = float("nan"), details: dict[str, Any] | None = None):
        self.t = t
        self.details = dict(details or {})
        super().__init__(message)

    def to_report(self) -> GuardReport:
        from ..models.schemas import GuardReport

        return GuardReport(
            guard=self.guard,
            t=self.t,
            message=str(self),
            details={k: _jsonable(v) for k, v in self.details.items()},
        )


class StateInvalidError(GuardViolation):
    guard = "state"


class PositivityError(StateInvalidError):
    guard = "positivity"


class MapDegenerateError(StateInvalidError):
    guard = "map-jacobian"


class GeometryViolation(GuardViolation):
    guard = "geometry"


class DistortionViolation(GuardViolation):
    guard = "distortion"


# ===== Numerical failures =====

class NumericalFailure(BallStabException):
    exit_code = 3


class LinearSolverError(NumericalFailure):
    """Sparse solve did not reach the residual contract."""

    def __init__(self, message: str, residual_history: list[float] | None = None):
        self.residual_history = list(residual_history or [])
        super().__init__(message)


class PicardNonConvergence(NumericalFailure):
    """Fixed-point iteration hit picard_max without meeting picard_tol."""

    def __init__(self, message: str, differences: list[float] | None = None, t: float = float("nan")):
        self.differences = list(differences or [])
        self.t = t
        super().__init__(message)


class OrderBelowThreshold(NumericalFailure):
    """Observed convergence order under the required threshold."""

    def __init__(self, message: str, table: list[dict[str, Any]] | None = None):
        self.table = list(table or [])
        super().__init__(message)


class InsufficientSnapshotsError(BallStabException):
    exit_code = 1


def _jsonable(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value
