"""Exception hierarchy for the semi-Markov queue solver."""


class SmqError(Exception):
    """Base class for every error raised by :mod:`smq`."""


class ModelError(SmqError, ValueError):
    """Invalid model or distribution parameters."""


class InvalidPmf(ModelError):
    pass


class InvalidModel(ModelError):
    pass


class InfeasibleTarget(ModelError):
    """An alpha-target parameterization implies a non-positive rate."""


class DomainError(SmqError, ValueError):
    """A transform was evaluated outside the region where it is finite."""


class GeometricRadius(DomainError):
    pass


class LstDomain(DomainError):
    pass


class NumericalError(SmqError, ArithmeticError):
    """A numerical procedure failed to meet its accuracy contract."""


class TruncationTooSmall(NumericalError):
    pass


class ContourThroughZero(NumericalError):
    pass


class NonIntegerWinding(NumericalError):
    pass


class RootCountMismatch(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class SingularBoundarySystem(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class MultiplicityUnhandled(NumericalError):
    pass


class NegativeProbability(NumericalError):
    pass


class NearSingularEvaluation(NumericalError):
    pass


class ExtrapolationDivergence(NumericalError):
    pass


class MassLeak(NumericalError):
    pass


class Unstable(SmqError, ValueError):
    """The load is at least one, so no stationary regime exists."""


class WrongTypeCount(SmqError, ValueError):
    pass
