"""Exception hierarchy shared by all possplit modules."""


class PossplitError(Exception):
    """Base class for every error raised by possplit."""


class UsageError(PossplitError, ValueError):
    """Invalid arguments or configuration supplied by the caller."""


class ConditionViolation(PossplitError):
    """A weight vector does not satisfy its order conditions exactly."""


class IdentityViolation(PossplitError):
    """A combinatorial identity fails for a weight vector.

    ``k`` and ``r`` identify the offending identity.
    """

    def __init__(self, k, r, value, target):
        super().__init__(f"identity (k={k}, r={r}) evaluates to {value}, expected {target}")
        self.k = k
        self.r = r
        self.value = value
        self.target = target


class NumericFailure(PossplitError, ArithmeticError):
    """A chain evaluation produced a non-finite value."""

    def __init__(self, message, step_index=None, trajectory=None):
        super().__init__(message)
        self.step_index = step_index
        self.trajectory = trajectory


class DegenerateInput(PossplitError, ValueError):
    """A sample pair has zero separation."""


class SymmetryViolation(PossplitError):
    """A result expected to be real carries a non-negligible imaginary part."""


class TanDomain(PossplitError, ValueError):
    """A state component left the open interval (-pi/2, pi/2)."""


class InsufficientData(PossplitError, ValueError):
    """Too few points survived filtering to fit a convergence slope."""
