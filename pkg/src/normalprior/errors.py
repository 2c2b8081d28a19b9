"""Exception types raised across the package."""


class NormalPriorError(Exception):
    """Base class for all package-specific errors."""


class MeshError(NormalPriorError):
    """Base class for mesh construction and query errors."""


class NonManifoldError(MeshError):
    """An edge is incident to a number of faces different from two."""


class InconsistentOrientationError(MeshError):
    """Two faces traverse a shared edge in the same direction."""


class DegenerateFaceError(MeshError):
    """A face has (numerically) zero area where a positive area is required."""


class SolverError(NormalPriorError):
    """Base class for linear solver errors."""


class BreakdownNaNError(SolverError):
    """A non-finite value appeared during an iterative solve."""


class PivotBreakdownError(SolverError):
    """Incomplete Cholesky hit a nonpositive pivot."""


class LineSearchFailedError(NormalPriorError):
    """No admissible Armijo step size was found."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonFiniteStateError(NormalPriorError):
    """An iteration variable became non-finite; the run is aborted."""


class ParseError(NormalPriorError):
    """A mesh or config file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class NonTriangleFaceError(ParseError):
    """A mesh file contains a face that is not a triangle."""
