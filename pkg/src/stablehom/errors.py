"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A configuration value violates a documented precondition."""


class DomainError(ValueError):
    """An argument lies outside an operation's mathematical domain."""


class NumericalError(RuntimeError):
    """A numerical routine could not meet its accuracy contract."""


class ConvergenceFailure(NumericalError):
    """An iterative solver ran out of iterations.

    Carries the last relative residual and the iteration count so callers can
    report partial progress.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = float(residual)
        self.iterations = int(iterations)
