"""Exception hierarchy shared across the package.

Every error raised by the public API derives from :class:`SalrError`, so
callers can catch one base class.  The CLI maps each subclass to a stable
process exit code (see ``salr.cli``).
"""

from __future__ import annotations

__all__ = [
    "SalrError",
    "ShapeError",
    "DomainError",
    "BoundsError",
    "ConfigError",
    "FormatError",
    "CorruptionError",
    "VerificationError",
]


class SalrError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SalrError):
    """Operand dimensions are incompatible or an array is not 2-D."""


class DomainError(SalrError):
    """A numeric argument lies outside the mathematical domain of the operation."""


class BoundsError(SalrError):
    """A row/column/block range falls outside the addressed matrix."""


class ConfigError(SalrError):
    """A configuration value is invalid or inconsistent with other settings."""


class FormatError(SalrError):
    """A serialized payload violates the file format (magic, version, sizes)."""


class CorruptionError(FormatError):
    """A structurally valid file whose sections disagree with each other."""


class VerificationError(SalrError):
    """A verification suite invariant did not hold."""
