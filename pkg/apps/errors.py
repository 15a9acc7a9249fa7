"""
Exception hierarchy shared by every component of the toolkit.

Each concrete error also derives from the builtin it specialises, so callers
can keep catching ``ValueError`` and friends.
"""


class StableAlignError(Exception):
    """Base class for all errors raised by the toolkit."""


class ConfigError(StableAlignError, ValueError):
    """Invalid or inconsistent configuration value."""


class ShapeMismatchError(StableAlignError, ValueError):
    """Arrays that must agree in shape (or landmark count) do not."""


class LandmarkOutOfBoundsError(StableAlignError, ValueError):
    """A landmark lies outside the grid or too close to its border."""


class DegenerateHeatmapError(StableAlignError, ValueError):
    """No mass survives the PDC threshold."""


class MetricDomainError(StableAlignError, ValueError):
    """A metric is undefined for the given samples."""


class StaleCacheError(StableAlignError, RuntimeError):
    """A forward cache no longer matches the model it was produced with."""


class FileFormatError(StableAlignError, ValueError):
    """A heatmap, landmark or checkpoint file is malformed."""


class NumericalFailureError(StableAlignError, ArithmeticError):
    """Training produced a non-finite loss."""
