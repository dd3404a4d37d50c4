"""Exception types shared across the package."""


class ParastabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ParastabError, ValueError):
    """Array shapes do not match the problem dimensions."""


class ConfigError(ParastabError, ValueError):
    """Invalid configuration file or option value."""


class NonlinearStepDivergence(ParastabError):
    """An implicit time step failed to converge or the state blew up."""

    def __init__(self, message, step_index=None, time=None, residual=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time
        self.residual = residual


class FitUnreliable(ParastabError):
    """Tail decay fit rejected (too few points or norms at round-off)."""


class NotStabilizable(ParastabError):
    """No stabilizing feedback gain found for the requested method."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class MaxIterations(ParastabError):
    """Iteration budget exhausted; carries the best iterate seen."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SubproblemNonconvex(ParastabError):
    """Quadratic subproblem has negative curvature along a sampled direction."""

    def __init__(self, message, rayleigh=None):
        super().__init__(message)
        self.rayleigh = rayleigh


class EnumerationTooLarge(ParastabError):
    """Brute-force control grid exceeds the evaluation cap."""

    def __init__(self, message, requested=None, cap=None):
        super().__init__(message)
        self.requested = requested
        self.cap = cap
