"""Exception hierarchy shared across the package.

ConfigError maps to CLI exit code 1, NumericalError and subclasses to exit
code 2. Plain ValueError is used for local argument/domain violations.
"""


class MfdTrackError(Exception):
    """Base class for package-specific errors."""


class ConfigError(MfdTrackError):
    """Invalid or inconsistent experiment configuration."""


class NumericalError(MfdTrackError):
    """Numerical failure: non-convergence, rank deficiency, singularity."""


class NoConvergenceError(NumericalError):
    """Iteration limit reached without meeting the stopping tolerance."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log if log is not None else []


class InsufficientExcitationError(NumericalError):
    """Regression matrix built from collected samples is rank-deficient."""


class SingularSteadyStateError(NumericalError):
    """Feedforward solve is singular (transfer accumulation below floor)."""


class InfeasibleSetpointError(NumericalError):
    """No equilibrium with admissible control exists for the set-point."""
