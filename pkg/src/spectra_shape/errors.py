"""Exception hierarchy shared by all modules."""


class SpectraShapeError(Exception):
    """Base class for all engine errors."""


class InvalidGeometryError(SpectraShapeError):
    """Mesh or geometric input is malformed (negative volume, bad dims, ...)."""


class MeshFormatError(SpectraShapeError):
    """Text mesh file could not be parsed; message carries the line number."""


class InadmissibleParameterError(SpectraShapeError):
    """det J_Phi <= 0 at an evaluation point for the requested parameter."""


class DegenerateProblemError(SpectraShapeError):
    """Constraint elimination left no free degrees of freedom."""


class PencilError(SpectraShapeError):
    """Pencil violates its contract (e.g. mass matrix not positive-definite)."""


class NearSingularError(SpectraShapeError):
    """Resolvent shift too close to an eigenvalue of the pencil."""


class ContourError(SpectraShapeError):
    """An eigenvalue lies on (or too close to) the integration contour."""


class ContractViolationError(SpectraShapeError):
    """Caller passed data violating a documented precondition."""


class MultiplicityError(SpectraShapeError):
    """Operation requires a simple eigenvalue but the cluster is larger."""


class ConfigError(SpectraShapeError):
    """Run configuration is invalid."""
