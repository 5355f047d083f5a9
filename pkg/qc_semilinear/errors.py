class SolverError(Exception):
    """Base class for every error raised by the solver chain."""

    exit_code = 2


class DomainError(SolverError, ValueError):
    """Inputs violate a precondition (points outside the domain, bad parameters)."""

    exit_code = 1


class ConfigError(SolverError, ValueError):
    exit_code = 1


class ResolutionError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


class UnsupportedError(SolverError):
    pass


class RepresentationError(SolverError):
    pass


class OrientationError(SolverError):
    pass


class VerificationError(SolverError):
    exit_code = 3
