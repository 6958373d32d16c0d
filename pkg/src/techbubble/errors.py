"""Exception hierarchy.

Each error carries a ``category`` that the command-line front end maps to an
exit code: usage -> 2, data -> 3, numeric -> 4.
"""


class TechBubbleError(Exception):
    category = "numeric"


class UsageError(TechBubbleError):
    category = "usage"


class ConfigError(UsageError):
    pass


class InvalidBandwidthError(UsageError):
    pass


class DataError(TechBubbleError):
    category = "data"


class DegenerateInputError(DataError):
    pass


class SampleTooShortError(DataError):
    pass


class WindowTooShortError(DataError):
    pass


class AlignmentError(DataError):
    pass


class NormalizationError(DataError):
    pass


class ParseError(DataError):
    pass


class NumericError(TechBubbleError):
    category = "numeric"


class SingularDesignError(NumericError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class NonconvergentSeriesError(NumericError):
    pass


EXIT_CODES = {"usage": 2, "data": 3, "numeric": 4}
