"""Exception types shared across the package."""


class PIOTError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PIOTError, ValueError):
    """Malformed or out-of-range input (non-positive couplings, bad shapes, ...)."""


class ConvergenceError(PIOTError, RuntimeError):
    """Sinkhorn scaling did not reach the requested tolerance.

    The last iterate and its marginal residual are attached so callers can
    decide whether the partial result is usable.
    """

    def __init__(self, message, plan=None, residual=None, iterations=None):
        super().__init__(message)
        self.plan = plan
        self.residual = residual
        self.iterations = iterations


class NotEquivalentError(PIOTError, ValueError):
    """Two matrices are not related by a positive diagonal scaling."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(PIOTError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, line=None, key=None):
        self.reason = message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key
