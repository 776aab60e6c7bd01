"""Exception hierarchy shared across the toolkit."""


class CsgFcmError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(CsgFcmError):
    """Invalid geometric input (bad primitive parameters, empty model, ...)."""


class DegenerateFrameError(GeometryError):
    """A moving frame could not be constructed at the requested parameter."""


class EmptyModelError(GeometryError):
    """The model does not intersect the computational grid."""


class BoundaryConditionError(CsgFcmError):
    """A boundary patch does not touch the active computational domain."""


class SolverError(CsgFcmError):
    """Iterative solver failed to converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class SceneError(CsgFcmError):
    """Scene document is syntactically or semantically invalid."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
