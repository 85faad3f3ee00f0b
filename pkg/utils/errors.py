"""Exception hierarchy shared by every package.

Each error carries a ``category`` string that the command line maps onto an
exit code and prints as part of a machine-readable error line.
"""

from typing import List, Optional, Sequence


class ReplayEngineError(Exception):
    """Base class for all errors raised by the replay engine."""

    category = "internal"

    def to_dict(self) -> dict:
        return {"error": self.category, "message": str(self)}


class ContractViolation(ReplayEngineError, ValueError):
    """A caller broke an operation's precondition (shapes, ranges, ids)."""

    category = "contract"


class NumericError(ReplayEngineError, ArithmeticError):
    """Non-finite values appeared during optimisation."""

    category = "numeric"


class IngestionError(ReplayEngineError, OSError):
    """A dataset file is missing or malformed."""

    category = "ingestion"

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.offset = offset


class ConfigurationError(ReplayEngineError, ValueError):
    """An experiment or component configuration is invalid.

    Args:
        message: Human readable summary
        fields: Dotted names of every offending field
    """

    category = "config"

    def __init__(self, message: str, fields: Optional[Sequence[str]] = None):
        self.fields: List[str] = list(fields or [])
        if self.fields:
            message = f"{message}: {', '.join(self.fields)}"
        super().__init__(message)

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["fields"] = self.fields
        return data


class UnsupportedTransformError(ContractViolation):
    """An image transform was requested for features without an image shape."""

    category = "unsupported-transform"


class ReportError(ReplayEngineError, ValueError):
    """Results handed to the report pipeline cannot be compared."""

    category = "report"


EXIT_CODES = {
    "config": 2,
    "ingestion": 3,
    "contract": 4,
    "numeric": 5,
    "report": 6,
    "unsupported-transform": 7,
}


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the command line exit code."""
    category = getattr(error, "category", None)
    return EXIT_CODES.get(category, 1)
