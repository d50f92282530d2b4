"""Combinatorics and finite-field simulations for quaternionic Shimura strata."""

from .errors import InvariantViolation, StrataError

__version__ = "0.1.0"

__all__ = ["InvariantViolation", "StrataError", "__version__"]
