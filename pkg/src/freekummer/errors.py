"""Shared error taxonomy.

Usage errors mean the caller broke a documented precondition.  Domain errors
mean the requested object does not exist or the evaluation point left the
region where a formula is valid.  Numeric errors signal solver failures,
inconsistency errors signal that two routes which must agree did not.
"""

from __future__ import annotations


class UsageError(ValueError):
    """A documented precondition on the arguments was violated."""


class DomainError(ValueError):
    """The request lies outside the mathematical domain of the operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or lost too much accuracy."""


class InconsistencyError(RuntimeError):
    """Two independently computed values that must agree did not."""
