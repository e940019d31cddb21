"""Exception hierarchy shared across the package."""


class RbaError(Exception):
    """Base class for all package errors."""


class ConfigError(RbaError):
    """Invalid configuration value or unknown feature id."""


class DataFormatError(RbaError):
    """Malformed input file; carries the offending row when known."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ProfileError(RbaError):
    """Infeasible dataset generation profile."""


class AttackMaterialError(RbaError):
    """Attacker model cannot produce an attempt (e.g. single-user dataset)."""


class EvaluationError(RbaError):
    """Degenerate or infeasible evaluation request."""
