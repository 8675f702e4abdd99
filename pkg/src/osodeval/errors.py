"""Exception hierarchy.

Input problems (malformed files, schema violations, bad configuration) map to
CLI exit code 1; numeric and evaluation failures map to exit code 2.
"""

from __future__ import annotations


class OsodError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ParseError(OsodError):
    """Document is not well-formed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SchemaError(OsodError):
    """Document is well-formed but violates the data model."""


class InputFileError(OsodError):
    """An input file is missing or unreadable."""


class ConfigurationError(OsodError):
    """Invalid parameters or inconsistent inputs."""


class NumericError(OsodError):
    exit_code = 2


class UndefinedObjectiveError(NumericError):
    """A normalized-cut cluster has zero total association."""


class EvaluationError(OsodError):
    exit_code = 2


class RecallUnreachableError(EvaluationError):
    """The requested known-class recall is never reached at any threshold."""

    def __init__(self, target: float, max_recall: float):
        self.target = target
        self.max_recall = max_recall
        super().__init__(
            f"recall target {target} unreachable; maximum achievable recall is {max_recall:.6f}"
        )
