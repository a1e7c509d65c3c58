class ForecasterError(Exception):
    """Base for everything raised on purpose by this package."""


class ShapeError(ForecasterError):
    pass


class DomainError(ForecasterError):
    pass


class SchemaError(ForecasterError):
    """A file does not follow the exchange format it claims to."""
