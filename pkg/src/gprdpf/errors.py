"""Exception types raised by the solver."""


class DomainError(ValueError):
    """Argument lies outside the domain an object was built for."""


class FeasibilityError(ValueError):
    """Requested target is not achievable.

    ``valid_range`` holds the closed interval of admissible values so callers
    can report or clip against it.
    """

    def __init__(self, message, valid_range=None):
        super().__init__(message)
        self.valid_range = valid_range


class NumericalError(ArithmeticError):
    """A numerical precondition failed (indefinite Gram matrix, lost bracket)."""


class ConsistencyError(RuntimeError):
    """Internal invariant violated; indicates a formula bug rather than bad input."""
