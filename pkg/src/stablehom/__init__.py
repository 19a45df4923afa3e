"""Numerical homogenization of stable-like jump forms in random media.

The package assembles scaled nonlocal Dirichlet forms with stationary random
coefficients on a periodic grid, solves their resolvent problems, and measures
convergence toward the constant-coefficient limit form, together with the
ergodic, spectral, and functional-inequality diagnostics that support those
runs.
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, ConvergenceFailure, DomainError, NumericalError

__all__ = [
    "ConfigurationError",
    "ConvergenceFailure",
    "DomainError",
    "NumericalError",
    "__version__",
]
