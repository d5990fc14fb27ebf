"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """Raised when an explicit oracle would exceed its size cap."""


class DegenerateInputError(ValueError):
    """Raised for inputs that make an operation ill-defined (e.g. rank-deficient bases)."""


class DivergenceError(RuntimeError):
    """Raised when an iterate or activation becomes non-finite.

    The partial trace (solver records or training log) is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
