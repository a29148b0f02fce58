"""Exception types raised across muflow."""


class MuflowError(Exception):
    pass


class MeanNotZero(MuflowError):
    """Raised when a periodic antiderivative is requested for a field with nonzero mean."""


class ParseError(MuflowError):
    def __init__(self, message: str, position: int, expected: frozenset[str] = frozenset()):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.expected = expected


class EvalError(MuflowError):
    pass


class DomainError(MuflowError):
    pass


class NotADiffeo(MuflowError):
    pass


class NotInMLambda(MuflowError):
    pass


class UndefinedFunctional(MuflowError):
    pass


class NonPositiveDensity(MuflowError):
    pass


class CollisionError(MuflowError):
    pass


class DegenerateQ(MuflowError):
    pass


class FitFailed(MuflowError):
    pass


class HypothesisViolated(MuflowError):
    pass


class PreconditionError(MuflowError):
    pass
