"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` code; the command
line front end maps :class:`ValidationError` to exit status 1 and
:class:`NumericalGuardError` to exit status 2.
"""


class LabError(Exception):
    reason = "error"

    def __init__(self, message, reason=None, **details):
        super().__init__(message)
        if reason is not None:
            self.reason = reason
        self.details = details


class ValidationError(LabError, ValueError):
    reason = "invalid-input"


class NumericalGuardError(LabError, ArithmeticError):
    """A resolution guard or convergence gate refused to produce a number."""

    reason = "numerical-guard"


class QuadratureError(NumericalGuardError):
    reason = "quadrature-gate"


class OscillationGuardError(NumericalGuardError):
    reason = "oscillation-guard"


class EnumerationBudgetError(NumericalGuardError):
    reason = "enumeration-budget"


class SearchExhaustedError(NumericalGuardError):
    """No sampled direction met the threshold; ``best`` holds the best candidate."""

    reason = "search-exhausted"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DichotomyError(NumericalGuardError):
    reason = "dichotomy-uncertified"


class OverlapWarning(UserWarning):
    """Bumps overlap, so closed-form norms do not apply."""
