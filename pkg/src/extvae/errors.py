"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: configuration problems exit with 2,
data problems with 3 and training/numerical failures with 4.
"""


class ExtVaeError(Exception):
    exit_code = 1


class DomainError(ExtVaeError, ValueError):
    """Argument outside the mathematical domain of a function."""

    exit_code = 3


class ShapeError(ExtVaeError, ValueError):
    exit_code = 3


class UsageError(ExtVaeError, RuntimeError):
    exit_code = 2


class ConfigError(ExtVaeError, ValueError):
    exit_code = 2


class DataError(ExtVaeError, ValueError):
    exit_code = 3


class DiagnosticError(ExtVaeError, RuntimeError):
    """A statistical procedure could not produce a trustworthy answer."""

    exit_code = 3


class BudgetError(ExtVaeError, RuntimeError):
    exit_code = 3


class TrainingError(ExtVaeError, RuntimeError):
    exit_code = 4


class ResampleSignal(ExtVaeError):
    """Raised when a draw must be rejected and redrawn by the caller."""
