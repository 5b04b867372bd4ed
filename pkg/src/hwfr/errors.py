"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class ConvergenceError(RuntimeError):
    """The solver exhausted its sweep budget (CLI exit code 3)."""

    def __init__(self, message, lambda_=None, index=None):
        super().__init__(message)
        self.lambda_ = lambda_
        self.index = index
