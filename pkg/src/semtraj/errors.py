"""Exception hierarchy.

``DataError`` subclasses signal bad input data (CLI exit code 1);
``ConfigError`` subclasses signal usage or configuration problems (exit code 2).
"""


class SemtrajError(Exception):
    """Base class for all package errors."""


class DataError(SemtrajError, ValueError):
    """Input data violates a documented precondition or invariant."""


class ConfigError(SemtrajError):
    """Bad configuration, schema or command-line usage."""


# datamodel
class MissingColumn(DataError):
    pass


class NonContiguousPositions(DataError):
    pass


class DuplicatePosition(DataError):
    pass


class BadPosition(DataError):
    pass


class EmptyItem(DataError):
    pass


class EmptyInput(DataError):
    pass


# embed
class BadHeader(DataError):
    pass


class BadVectorArity(DataError):
    def __init__(self, line: int, message: str | None = None):
        self.line = line
        super().__init__(message or f"wrong number of vector components on line {line}")


class NonNumericComponent(DataError):
    def __init__(self, line: int, message: str | None = None):
        self.line = line
        super().__init__(message or f"non-numeric vector component on line {line}")


class AllTokensOutOfVocabulary(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class BackendUnavailable(SemtrajError):
    pass


class AuthMissing(ConfigError):
    pass


class UnknownBackend(ConfigError):
    pass


# metrics
class ZeroVector(DataError):
    pass


class TooShort(DataError):
    pass


class EmptySet(DataError):
    pass


class ZeroCentroid(DataError):
    pass


# whiten
class TooFewSamples(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class SingularCovariance(DataError):
    pass


# stats
class DegenerateGroup(DataError):
    pass


class ZeroPooledSD(DataError):
    pass


class LengthMismatch(DataError):
    pass


class InsufficientOverlap(DataError):
    pass
