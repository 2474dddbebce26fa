"""Error hierarchy.

Every error raised by the library derives from :class:`NFTProjError`. The
``exit_code`` class attribute is what the command line maps the error to:
2 for bad or inconsistent data, 3 for numerical failures.
"""


class NFTProjError(Exception):
    exit_code = 2


class DataError(NFTProjError):
    """Input data is malformed or inconsistent."""


class NumericError(NFTProjError):
    exit_code = 3


# ingest
class ParseError(DataError, ValueError):
    code = "parse"

    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonSaleEvent(ParseError):
    code = "non_sale"


class IoError(DataError, OSError):
    pass


class HttpError(DataError):
    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class SchemaError(DataError, ValueError):
    pass


# series / synth
class UnknownToken(DataError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown token"


class InvalidSpec(DataError, ValueError):
    pass


# context
class RankDeficient(NumericError):
    pass


class EmptyCollection(DataError, ValueError):
    pass


class DegenerateRange(NumericError):
    pass


# nn
class ShapeMismatch(DataError, ValueError):
    pass


class SeriesTooShort(DataError, ValueError):
    pass


class NonFinite(NumericError, FloatingPointError):
    pass


class CorruptCheckpoint(DataError):
    pass


# transform
class LengthMismatch(DataError, ValueError):
    pass


class TokenSetMismatch(DataError, ValueError):
    pass


# metrics
class ZeroActual(DataError, ZeroDivisionError):
    pass


class DegenerateVariance(NumericError):
    pass


class ContextDistanceWarning(UserWarning):
    """A collection's context lies farther from every training context than the threshold."""
