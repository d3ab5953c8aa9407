"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: ``DataError`` subclasses exit
with 3 and ``DivergenceError`` with 4.
"""


class SoftDebiasError(Exception):
    """Base class for all package errors."""


class DataError(SoftDebiasError):
    """Malformed or inconsistent input data."""


class EmbeddingFormatError(DataError):
    pass


class BiasSpecError(DataError):
    pass


class DivergenceError(SoftDebiasError):
    """Training produced a non-finite loss or gradient.

    ``last_good`` holds whatever state the trainer could salvage from the
    last finite step (a parameter snapshot), or None.
    """

    def __init__(self, message, last_good=None, diagnostics=None):
        super().__init__(message)
        self.last_good = last_good
        self.diagnostics = diagnostics or {}
