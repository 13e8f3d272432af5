"""Shared exception types."""

from __future__ import annotations


class ValidationError(ValueError):
    """An input document or argument violates one of the package's contracts.

    ``field`` names the offending field, record, or line so that callers can
    surface it in machine-readable error reports.
    """

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field
