"""Exception hierarchy."""


class RoundTripError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(RoundTripError, ValueError):
    pass


class NumericalError(RoundTripError):
    pass


class InconsistencyError(NumericalError):
    """A computed object violates a structural identity it must satisfy."""


class InputError(RoundTripError, ValueError):
    pass


class EvaluationError(NumericalError):
    """An oracle returned a non-finite value."""


class ConvexityError(NumericalError):
    """The fiberwise Hessian is not positive definite."""


class BlowUpError(NumericalError):
    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class NoMinimumError(NumericalError):
    """The fiber restriction of H has no reachable minimum."""


class SymmetryUnsolvableError(NumericalError):
    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConvergenceError(NumericalError):
    pass


class PeriodCollapseError(ConvergenceError):
    """Newton drifted to an equilibrium (period -> 0 or vanishing field)."""


class GeometryError(NumericalError):
    pass


class SectionInvalidError(GeometryError):
    pass


class ReparametrizationError(GeometryError):
    pass


class NotTwoWayError(GeometryError):
    pass


class ClassificationError(NumericalError):
    pass


class CapabilityError(RoundTripError):
    pass


class ConfigError(RoundTripError, ValueError):
    pass
