"""Exception hierarchy for the package."""


class HsicError(Exception):
    """Base class for all errors raised by hsicagg."""


class InvalidArgumentError(HsicError, ValueError):
    pass


class DegenerateSampleError(HsicError, ValueError):
    """A sample block has (numerically) zero pairwise spread."""


class SampleTooSmallError(HsicError, ValueError):
    pass


class EmptyCollectionError(HsicError, ValueError):
    pass


class UndefinedError(HsicError, ZeroDivisionError):
    pass


class ConfigError(HsicError, ValueError):
    """Experiment configuration could not be loaded or validated."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
