"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HeatdecError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(HeatdecError):
    """Invalid hyperparameter or configuration value."""


class DomainError(HeatdecError):
    """Input outside the documented domain (bad bounds, mismatched shapes)."""


class DegenerateInputError(HeatdecError):
    """Heatmap cannot be decoded (all-zero, non-finite, or empty)."""


class DegenerateGeometryError(HeatdecError):
    """Anchor geometry is insufficient for a position solve."""


class PtsParseError(HeatdecError):
    """Malformed landmark annotation file.

    Carries the offending path and 1-based line number so callers can report
    a positioned diagnostic.
    """

    def __init__(self, message: str, path: str, line_no: int) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no
