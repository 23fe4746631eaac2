"""Exception hierarchy shared across the package.

The CLI maps these onto exit statuses: usage/validation problems exit 2,
environment/I-O problems exit 1 (plain ``OSError`` and friends).
"""

from __future__ import annotations


class UsageError(ValueError):
    """Caller violated a precondition (bad shapes, bad request, bad value)."""


class UndefinedCorrelationError(UsageError):
    """Rank correlation is undefined for the given input (e.g. all ties)."""


class FormatError(UsageError):
    """A tensor file does not follow the feature-pack byte format."""

    def __init__(self, message: str, *, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DataError(UsageError):
    """A tensor file parsed but carries invalid values (NaN/Inf)."""


class CorpusError(UsageError):
    """A manifest or the corpus it describes failed validation."""
