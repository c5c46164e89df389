"""Exception hierarchy shared by all modules."""


class DegresError(Exception):
    """Base class for every error raised by the toolkit."""


class IntegrationError(DegresError):
    pass


class StepSizeUnderflow(IntegrationError):
    """The adaptive integrator could not take a step (stiffness or blow-up)."""


class NonFiniteField(IntegrationError):
    """A vector field returned NaN or Inf."""


class NotPeriodic(DegresError):
    pass


class SingularVariational(DegresError):
    pass


class ZeroOnBoundary(DegresError):
    """The field vanishes (numerically) on the curve used for a degree."""


class RefinementExhausted(DegresError):
    pass


class NoZeros(DegresError):
    pass


class DegenerateProfile(NoZeros):
    """The Melnikov profile vanishes identically."""


class NoReturn(DegresError):
    pass


class TangentialCrossing(DegresError):
    pass


class AmplitudeRootNotBracketed(DegresError):
    pass


class NewtonDiverged(DegresError):
    pass


class SingularJacobian(DegresError):
    pass


class InvalidParams(DegresError, ValueError):
    pass


class UnknownSystem(DegresError, KeyError):
    pass


class ConfigError(DegresError):
    pass
