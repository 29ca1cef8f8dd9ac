"""Exception types raised across the pipeline.

Grouped by family so the CLI can map them to exit codes:
config problems -> 2, I/O problems -> 3, data problems -> 4.
"""


class TpxcalError(Exception):
    """Base class for all package errors."""


class ConfigError(TpxcalError):
    """Invalid configuration value or combination."""


class RangeError(TpxcalError):
    """A field is outside its allowed range (pixel index, transmission, ...)."""


class BadMagic(TpxcalError):
    """Byte source does not start with the event-stream magic."""


class TruncatedFile(TpxcalError):
    """Declared record count disagrees with the actual byte length."""


class IoFailure(TpxcalError):
    """Underlying read/write failed."""


class ScaleError(TpxcalError):
    """Non-finite scale supplied for image export."""


class UnsortedInput(TpxcalError):
    """Operation requires a time-sorted input."""


class EmptyCluster(TpxcalError):
    """Centroid requested for a cluster with no members."""


class LabelMismatch(TpxcalError):
    """Cluster events do not line up with the ground-truth label table."""


class EmptyHistogram(TpxcalError):
    """Histogram has no counts, so a peak width is undefined."""


class NoHalfCrossing(TpxcalError):
    """Peak does not fall below half maximum inside the histogram range."""


class EmptyImage(TpxcalError):
    """Image is identically zero where a nonzero one is required."""


class GeometryMismatch(TpxcalError):
    """Images passed to one operation disagree in shape, units or center."""
