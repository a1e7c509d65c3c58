"""Exception hierarchy shared across the toolkit."""


class SkycastError(Exception):
    """Base class for all toolkit errors."""


class OutOfDome(SkycastError):
    """Pixel lies outside the fisheye dome (radial distance too large)."""


class OutOfPlane(SkycastError):
    """Sky direction too close to the horizon to project onto the plane."""


class ShapeError(SkycastError):
    """Array shape or size does not match what the operation requires."""


class CoverageError(SkycastError):
    """Requested time or minute is not covered by the available data."""


class DomainError(SkycastError):
    """Scalar argument outside the mathematically valid domain."""


class GapError(SkycastError):
    """A required frame is missing from an otherwise regular sequence."""


class JoinError(SkycastError):
    """Two tables that must align on keys do not."""


class SchemaError(SkycastError):
    """A CSV or config file violates its declared schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
