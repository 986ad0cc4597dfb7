"""Exception hierarchy."""


class TracshapeError(Exception):
    """Base class for all package errors."""


class MeshFormatError(TracshapeError):
    """Malformed mesh or config document."""


class MeshValidationError(TracshapeError):
    """Mesh violates a structural invariant; message names the entity."""


class FixtureError(TracshapeError):
    """Unknown fixture name or degenerate fixture parameters."""


class SolveError(TracshapeError):
    """Static or adjoint solve failed."""


class SingularSystemError(SolveError):
    """Constraints leave a rigid-body mode free; message names the mode."""


class ConvergenceError(SolveError):
    """Iterative solver exceeded its iteration cap."""


class ExportError(TracshapeError):
    """Surface extraction or file export failed."""
