"""Structured error types shared by every module."""

from __future__ import annotations


class StrataError(ValueError):
    """Semantic error carrying a short machine-readable code.

    The CLI maps every StrataError to exit status 3.
    """

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        self.message = message or code
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.message == self.code:
            return self.code
        return f"{self.code}: {self.message}"


class InvariantViolation(StrataError):
    """Raised when an algebraic invariant fails on supposedly valid input."""

    def __init__(self, message: str):
        super().__init__("invariant violation", message)
