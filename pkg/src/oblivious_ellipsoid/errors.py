"""Exception hierarchy shared by every module of the package."""


class OEAError(Exception):
    """Base class for all errors raised by this package."""


class ZeroColumn(OEAError, ValueError):
    def __init__(self, j: int):
        super().__init__(f"column {j} of A is (numerically) zero")
        self.j = j


class RankDeficient(OEAError, ValueError):
    pass


class AssumptionViolated(OEAError, ValueError):
    """The columns of A do not positively span R^n (or m <= n)."""


class DimensionMismatch(OEAError, ValueError):
    pass


class RedundantConstraint(OEAError, ValueError):
    def __init__(self, i: int, u_hat: float, box_max: float):
        super().__init__(
            f"general constraint {i} is redundant: u_hat={u_hat!r} exceeds "
            f"the box maximum {box_max!r}"
        )
        self.i = i


class ImmediateInfeasible(OEAError):
    """A box lower bound already exceeds its right-hand side.

    ``certificate`` holds the resulting solution of the alternative system.
    """

    def __init__(self, i: int, certificate, problem=None):
        super().__init__(f"lower bound of constraint {i} exceeds its right-hand side")
        self.i = i
        self.certificate = certificate
        self.problem = problem


class TooLarge(OEAError, ValueError):
    pass


class BadSpec(OEAError, ValueError):
    pass


class SingularShape(OEAError, ArithmeticError):
    pass


class NotPositiveVolume(OEAError, ArithmeticError):
    pass


class PreconditionF(OEAError, ValueError):
    pass


class RepresentationMismatch(OEAError, ArithmeticError):
    pass


class MissingTau(OEAError, ValueError):
    pass


class NotACertificate(OEAError, ArithmeticError):
    pass


class PreconditionTypeQ(OEAError, ValueError):
    pass


class NumericalBreakdown(OEAError, ArithmeticError):
    pass


class PreconditionViolation(OEAError, ValueError):
    pass


class EmptySequence(OEAError, ValueError):
    pass


class ParseError(OEAError, ValueError):
    pass


class InvariantViolation(OEAError, ValueError):
    pass
