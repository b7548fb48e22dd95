"""Exception types shared by all modules.

The CLI maps ConfigurationError to exit status 2 and CheckFailure to 1.
"""


class BlowlabError(Exception):
    pass


class DomainError(BlowlabError, ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class ConfigurationError(BlowlabError, ValueError):
    """Inconsistent or unsupported run parameters."""


class SingularityError(DomainError):
    """Evaluation at a genuine singularity of a closed-form solution."""


class AccuracyError(BlowlabError):
    """A requested quantity cannot be resolved at the given resolution."""


class DivergenceError(BlowlabError):
    """Time integration exceeded the blowup guard."""

    def __init__(self, message, tau):
        super().__init__(message)
        self.tau = tau


class TuningError(BlowlabError):
    """The blowup-time shooting map has no sign change on its window."""


class CheckFailure(BlowlabError):
    """A numerical verification did not meet its tolerance."""
