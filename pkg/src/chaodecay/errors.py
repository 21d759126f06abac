"""Exception hierarchy mapped onto process exit codes by the CLI."""

from __future__ import annotations

__all__ = [
    "ChaodecayError",
    "InputOutputError",
    "SyntaxUsageError",
    "ValidationError",
    "NumericError",
    "StatsError",
]


class ChaodecayError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InputOutputError(ChaodecayError):
    """Missing files, unwritable output directories, malformed CSV."""

    exit_code = 1


class SyntaxUsageError(ChaodecayError):
    """Unparseable config files or malformed command lines."""

    exit_code = 2


class ValidationError(ChaodecayError):
    """Config that parses but violates a documented constraint."""

    exit_code = 3


class NumericError(ChaodecayError):
    """Algorithmic failure: non-convergence, exhausted iteration budgets."""

    exit_code = 4


class StatsError(ChaodecayError):
    """Not enough usable data to produce the requested estimate."""

    exit_code = 5
