"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands live on incompatible mode sets or grids."""


class DomainError(ValueError):
    """An input sits outside the domain of a pointwise composition
    (pole of x/(1+x), vanishing Jacobian, ...).  Carries the offending
    supremum in ``args[1]`` when available."""


class OverflowRisk(FloatingPointError):
    """A requested exponential weight would overflow double precision.
    Carries the offending (lam, cutoff) pair."""

    def __init__(self, message, lam=None, cutoff=None):
        super().__init__(message)
        self.lam = lam
        self.cutoff = cutoff


class SolverError(RuntimeError):
    """An elliptic solve failed (quadrature residual above tolerance,
    fixed point not contracting, singular linear system)."""

    def __init__(self, message, contraction_factor=None, residual=None):
        super().__init__(message)
        self.contraction_factor = contraction_factor
        self.residual = residual


class PinchOffError(RuntimeError):
    """The interface reached the bottom: 1 + eps*h is no longer bounded
    away from zero, the strip transform stopped being a diffeomorphism."""


class BlowupError(RuntimeError):
    """Non-finite values appeared in the evolved spectrum."""


class InequalityViolation(AssertionError):
    """A verified inequality produced a ratio above one.  Carries the
    row identifier and a serializable counterexample bundle."""

    def __init__(self, message, inequality_id=None, counterexample=None):
        super().__init__(message)
        self.inequality_id = inequality_id
        self.counterexample = counterexample
