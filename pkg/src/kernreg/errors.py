"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """An eigen-solver, factorization or kernel evaluation produced unusable numbers."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class KernelEvaluationError(NumericalError):
    pass


class DataError(ValueError):
    """Assembled data violates an invariant the caller relies on (e.g. PSD)."""


class BracketNotFoundError(RuntimeError):
    """All verdicts along an exponent grid agree, so no threshold was bracketed.

    ``side`` is ``"above"`` when every tested exponent converged (the critical
    exponent exceeds ``bound``) and ``"below"`` when every exponent diverged.
    """

    def __init__(self, message, bound: float, side: str):
        super().__init__(message)
        self.bound = bound
        self.side = side


class SaturationError(RuntimeError):
    """A tail sum fell below floating-point resolution of the total."""

    def __init__(self, message, tails=None):
        super().__init__(message)
        self.tails = tails
