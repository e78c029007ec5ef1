"""Exception types shared across the package.

Filesystem failures propagate as plain OSError; unknown layer names raise
KeyError (a LookupError). Everything domain-specific gets its own class so
callers can tell bad data from bad usage.
"""


class DimensionError(ValueError):
    """Tensor rank or extents do not match what the operation requires."""


class FormatError(ValueError):
    """On-disk container is malformed (magic, version, dtype, truncation)."""


class DomainError(ValueError):
    """Scalar argument outside its mathematical domain (weights, sigma)."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""
