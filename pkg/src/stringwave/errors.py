"""Exception hierarchy shared by every stringwave module."""


class StringwaveError(Exception):
    """Base class for all errors raised by the package."""


class GeometryError(StringwaveError):
    pass


class DegeneratePoint(GeometryError):
    """Nearest-point projection is undefined (e.g. the origin for a sphere)."""


class PointOffManifold(GeometryError):
    pass


class NotTangent(GeometryError):
    pass


class ChartDomainExceeded(GeometryError):
    pass


class SingularMetric(GeometryError):
    pass


class SolverError(StringwaveError):
    pass


class InsufficientSamples(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, message, last_delta=float("nan"), iterations=0):
        super().__init__(message)
        self.last_delta = last_delta
        self.iterations = iterations


class WindowExhausted(SolverError):
    pass


class CFLViolation(SolverError):
    pass


class BlowupDetected(SolverError):
    pass


class ResampleOutOfRange(SolverError):
    pass


class NoPrimitiveAvailable(StringwaveError):
    """The action needs an explicit primitive B with dB = Omega."""


class ConfigError(StringwaveError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))
