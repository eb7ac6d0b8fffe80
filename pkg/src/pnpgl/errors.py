"""Exception types shared across the package.

Every failure of a numerical precondition raises a NumericalError subclass
whose message names the violated property, so the command line front end can
report it on stderr and exit with a dedicated status code.
"""


class NumericalError(Exception):
    """A numerical invariant or precondition failed."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix required to be positive definite is not (within tolerance)."""


class SingularFilterError(NumericalError):
    """A graph filter required to be invertible has (near-)zero eigenvalues.

    Raised by operations that need W**-1. Callers that can live with a
    rank-deficient filter should switch to the truncated/constrained variants
    instead of retrying.
    """


class ConvergenceError(NumericalError):
    """An iterative routine did not reach its tolerance within the cap."""
