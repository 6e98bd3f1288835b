"""Exception types with stable short codes.

Every error raised by the library carries a ``code`` string that callers
(and the CLI) can match on without parsing messages.
"""


class CoulombTubeError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "generic"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"{self.code}: {message}" if message else self.code)


class ValidationError(CoulombTubeError):
    """Bad input: geometry, parameters, or config constraints violated."""

    code = "validation"

    def __init__(self, code: str, message: str = ""):
        super().__init__(message, code=code)


class SolverError(CoulombTubeError):
    """Numerical solver failed to reach its target tolerance."""

    code = "solver"

    def __init__(self, code: str, message: str = "", history=None):
        self.history = history
        super().__init__(message, code=code)


class ConfigError(CoulombTubeError):
    """Config document failed validation; carries all violations at once."""

    code = "config"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations), code="config")
