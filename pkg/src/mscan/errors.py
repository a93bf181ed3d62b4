"""Shared exception types."""


class DomainError(ValueError):
    """Input lies outside the valid domain of an operation."""


class EmptyScaleSetError(ValueError):
    """No admissible scale satisfies the minimum-size constraint."""


class EmptyRegionError(ValueError):
    """A continuum region contains no grid point after discretization."""


class RegionCapError(ValueError):
    """Enumeration would exceed the configured region-count cap."""


class CalibrationMismatchError(ValueError):
    """Quantile-table metadata does not match the requested configuration."""


class BudgetExceededError(RuntimeError):
    """Simulation would exceed the configured resource budget."""


class GridFormatError(ValueError):
    """Malformed grid, table, or report file."""
