"""Exception types shared across the package.

The CLI maps ``ValidationError`` to exit code 2 and ``NumericalError`` to
exit code 3; everything else is a plain bug.
"""


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract (shapes, schemas)."""


class NumericalError(RuntimeError):
    """Raised on numerical failure: zero-norm states, measure-zero branches,
    rank-deficient environments that the pseudo-inverse cannot rescue."""
