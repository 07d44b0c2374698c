"""Exception hierarchy shared by all modules."""


class MembraneWalkError(Exception):
    """Base class for every error raised by this package."""


class SpecError(MembraneWalkError, ValueError):
    """A membrane definition or environment is malformed."""


class ProbabilitySumError(SpecError):
    pass


class EmptyKernelEntry(SpecError):
    pass


class BadPeriod(SpecError):
    pass


class BadDimension(SpecError):
    pass


class DimensionMismatch(SpecError):
    pass


class InvalidMove(SpecError):
    pass


class UnknownBuiltin(SpecError, KeyError):
    pass


class KernelMismatch(MembraneWalkError, ValueError):
    pass


class NotIrreducible(MembraneWalkError):
    """The embedded chain has no unique stationary law."""

    def __init__(self, message, closed_classes=()):
        super().__init__(message)
        self.closed_classes = [list(c) for c in closed_classes]


class BudgetTooSmall(MembraneWalkError):
    pass


class OverflowGuard(MembraneWalkError, OverflowError):
    pass


class GridOutOfRange(MembraneWalkError, ValueError):
    pass


class NoVisits(MembraneWalkError):
    pass


class PipelineMissing(MembraneWalkError):
    pass


class TooFewSamples(MembraneWalkError, ValueError):
    pass


class InversionNotConverged(MembraneWalkError, ArithmeticError):
    pass


class BadWeights(MembraneWalkError, ValueError):
    pass
