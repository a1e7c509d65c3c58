"""Sky-image preprocessing, persistence baselines, and forecast verification."""

__version__ = "0.1.0"

from .errors import (CoverageError, DomainError, GapError, JoinError,
                     OutOfDome, OutOfPlane, SchemaError, ShapeError,
                     SkycastError)

__all__ = [
    "CoverageError", "DomainError", "GapError", "JoinError", "OutOfDome",
    "OutOfPlane", "SchemaError", "ShapeError", "SkycastError",
]
