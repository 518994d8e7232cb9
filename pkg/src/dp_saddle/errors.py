"""Exception types shared across the accountant modules."""


class AccountantError(Exception):
    """Base class for errors raised by this package."""


class AccuracyError(AccountantError):
    """A numerical routine could not reach its requested tolerance.

    Attributes
    ----------
    achieved_tol : float or None
        The tolerance that was actually reached before giving up.
    """

    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class SolverError(AccountantError):
    """A root solver failed to converge.

    Attributes
    ----------
    bracket : tuple or None
        The last (lo, hi) bracket the solver held when it gave up.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateCompositionError(AccountantError):
    """The composed privacy loss is a point mass at zero (e.g. sampling rate 0)."""


class BracketRangeError(AccountantError):
    """An inversion could not bracket its target within the allowed range."""
