"""Exception hierarchy shared by all flowmap modules."""


class FlowmapError(Exception):
    """Base class for all flowmap errors."""


class InvalidInputError(FlowmapError):
    """An argument violates a documented precondition."""


class FormatError(FlowmapError):
    """A file does not conform to its documented format."""


class InsufficientDataError(FlowmapError):
    """Not enough samples to perform the requested estimation."""


class DegenerateGeometryError(FlowmapError):
    """Geometry is degenerate (zero-length segment, zero-length path)."""
