"""Exception types shared across the package."""


class SparsectError(Exception):
    """Base class for all package-specific errors."""


class FormatError(SparsectError):
    """A file does not conform to one of the binary formats."""


class GeometryError(SparsectError, ValueError):
    """Shapes or geometry descriptors are inconsistent."""


class NumericalError(SparsectError):
    """A computation produced non-finite values or a solver failed."""
