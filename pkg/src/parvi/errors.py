"""Exception types shared across the package."""


class ParviError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ParviError, ValueError):
    """A scalar parameter lies outside its documented range."""


class InvalidInputError(ParviError, ValueError):
    """An array argument has the wrong shape or contains non-finite values."""


class DegenerateEnsembleError(ParviError, ValueError):
    """The particle ensemble is too degenerate for the requested quantity."""


class LinearSolveError(ParviError, ArithmeticError):
    """A kernel system could not be solved."""


class NonFiniteError(ParviError, FloatingPointError):
    """A gradient oracle or vector field produced a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DataError(ParviError, ValueError):
    """A dataset file is malformed or has invalid labels."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
