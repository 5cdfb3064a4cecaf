"""Exception types shared across the package."""


class DualtuneError(Exception):
    """Base class for all package errors."""


class InputError(DualtuneError, ValueError):
    """Malformed input: bad file, bad arguments, violated preconditions."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DegenerateError(DualtuneError):
    """An operation hit a degenerate configuration (zero polynomial, plateau, rank loss)."""


class SolveError(DualtuneError):
    """A numeric solve failed to reach the requested tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
