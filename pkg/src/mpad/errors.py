"""Exception types shared across the toolkit."""


class MpadError(Exception):
    """Base class for every error raised by this package."""


class FormatError(MpadError):
    """A file or record does not match its documented grammar."""


class GeometryError(MpadError):
    """Landmark or mesh geometry is degenerate for the requested operation."""
