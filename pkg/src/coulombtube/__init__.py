"""coulombtube: Coulomb operators on shrinking tubes and their 1D limits."""

__version__ = "0.1.0"

from .errors import ConfigError, CoulombTubeError, SolverError, ValidationError

__all__ = [
    "__version__",
    "CoulombTubeError",
    "ValidationError",
    "SolverError",
    "ConfigError",
]
