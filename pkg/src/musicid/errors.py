"""Exception hierarchy shared by the library and the CLI.

The CLI maps :class:`DataError` subclasses to the data-error exit code and
:class:`UsageError` to the usage exit code; anything else is internal.
"""


class MusicIDError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(MusicIDError, ValueError):
    """Invalid parameter or configuration value."""


class DataError(MusicIDError):
    """Input data violates a precondition."""


# ingest
class MissingColumn(DataError):
    def __init__(self, column: str):
        super().__init__(f"missing required column: {column}")
        self.column = column


class EmptySession(DataError):
    pass


class NonMonotonicTime(DataError):
    pass


# featurize
class SessionTooShort(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class EmptySelection(UsageError):
    pass


# forest
class EmptyCounts(DataError):
    pass


class SingleClass(DataError):
    pass


class InsufficientData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class UnknownUser(DataError):
    pass


class ModelFormatError(DataError):
    pass


# eval
class TooFewFrames(DataError):
    pass


class TooFewRows(DataError):
    pass


class UnseenLabel(DataError):
    pass


class ZeroWithinVariance(DataError):
    pass


class DegenerateGroups(DataError):
    pass


class InvalidDf(UsageError):
    pass


class MissingCondition(DataError):
    pass


class MissingInput(DataError):
    pass
