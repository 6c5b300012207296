"""Exception types shared across the package.

The CLI maps these onto exit codes: I/O failures exit 1, everything
else (validation and format errors) exits 2.
"""


class SempruneError(Exception):
    """Base class for all errors raised by this package."""


class IoFailureError(SempruneError):
    """Underlying file could not be read or written."""


class TembFormatError(SempruneError):
    """A .temb file violates the container format."""


class BadMagicError(TembFormatError):
    pass


class UnsupportedVersionError(TembFormatError):
    pass


class UnsupportedDtypeError(TembFormatError):
    pass


class TruncatedPayloadError(TembFormatError):
    """Declared payload size and actual byte count disagree."""


class NonFiniteValueError(TembFormatError):
    """Payload contains NaN or infinity."""


class DimensionMismatchError(SempruneError):
    pass


class EmptyInputError(SempruneError):
    pass


class EmptyScoresError(SempruneError):
    pass


class IndexOutOfRangeError(SempruneError):
    pass


class InvalidParamsError(SempruneError):
    pass


class EmptyTruthError(SempruneError):
    pass


class MismatchedUniverseError(SempruneError):
    pass
