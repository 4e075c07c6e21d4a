"""
Exception hierarchy for the convergence toolkit.
Every error carries a stable machine-readable code used by the CLI.
"""
from typing import Any, Optional


class ConvergenceError(Exception):
    """Base class for all toolkit errors."""

    code = "convergence-error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


class InvalidParameterError(ConvergenceError, ValueError):
    code = "invalid-parameter"


class UnknownSeriesError(InvalidParameterError):
    code = "unknown-series"


class ShapeError(ConvergenceError, ValueError):
    code = "shape-error"


class ExhaustedStreamError(ConvergenceError, IndexError):
    code = "exhausted-stream"


class InvalidPermutationError(ConvergenceError, ValueError):
    code = "invalid-permutation"


class InvalidBlocksError(ConvergenceError, ValueError):
    code = "invalid-blocks"


class UnsupportedMethodError(ConvergenceError, ValueError):
    code = "unsupported-method"


class InvalidRuleError(ConvergenceError, ValueError):
    code = "invalid-rule"


class NotAFrameError(ConvergenceError):
    code = "not-a-frame"


class NotConditionallyConvergentError(ConvergenceError):
    """Raised when the rearrangement precheck finds no evidence of conditional convergence."""

    code = "not-conditionally-convergent-evidence"


class BudgetExceededError(ConvergenceError):
    """
    Raised when an operation runs out of its term budget.

    Args:
        message: Human-readable reason
        partial: Whatever the operation produced before stopping (e.g. a trace)
    """

    code = "budget-exceeded"

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial
