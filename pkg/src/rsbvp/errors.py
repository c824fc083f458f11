"""Exception hierarchy shared by every module of the package."""


class RsbvpError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(RsbvpError):
    """Raised by the expression parser.

    ``offset`` is the byte offset into the UTF-8 source, ``expected`` the set
    of tokens that would have been accepted at that position.
    """

    def __init__(self, message, offset, expected=frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(RsbvpError, ArithmeticError):
    """Evaluation left the domain of a function (log of 0, 1/0, ...)."""

    def __init__(self, message, subexpr):
        self.subexpr = subexpr
        super().__init__(f"{message} in subexpression '{subexpr}'")


class DerivativeOrderError(RsbvpError, ValueError):
    pass


class ShapeMismatchError(RsbvpError, ValueError):
    pass


class HypothesisViolation(RsbvpError):
    """A standing assumption of the existence theory fails for this problem.

    Examples: a vanishing leading coefficient, a vanishing Wronskian, or a
    singular boundary matrix.
    """


class SingularBoundaryMatrix(HypothesisViolation):
    pass


class CertificateFailed(RsbvpError):
    """The contraction constant is not below one."""


class NonConvergenceError(RsbvpError):
    """An iteration stopped at its cap without meeting its tolerance.

    ``partial`` holds the last iterate (a Trajectory) when one exists.
    """

    def __init__(self, message, partial=None, history=()):
        self.partial = partial
        self.history = tuple(history)
        super().__init__(message)


class BallViolation(NonConvergenceError):
    pass


class ProblemFileError(RsbvpError, ValueError):
    pass
