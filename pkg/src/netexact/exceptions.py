"""Exception hierarchy.

Every error carries a stable ``code`` string and the CLI exit status it maps to,
so command-line reports stay machine-readable.
"""


class NetExactError(Exception):
    code = "ERROR"
    exit_status = 1


class ConfigError(NetExactError, ValueError):
    code = "CONFIG_ERROR"
    exit_status = 2


class DataError(NetExactError, ValueError):
    code = "DATA_ERROR"
    exit_status = 3


class EdgeListParseError(DataError):
    code = "EDGE_LIST_PARSE"

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SelfLoopError(EdgeListParseError):
    code = "SELF_LOOP"


class FocalOutcomeMissingError(DataError):
    code = "FOCAL_OUTCOME_MISSING"


class EmptyFocalSetError(DataError):
    code = "EMPTY_FOCAL_SET"


class IncompatibleStatisticError(ConfigError):
    code = "INCOMPATIBLE_STATISTIC"


class DegenerateStatisticError(NetExactError):
    code = "DEGENERATE_STATISTIC"
    exit_status = 4


class DegenerateSamplerError(DegenerateStatisticError):
    """The restricted assignment set holds a single assignment."""

    code = "DEGENERATE_SAMPLER"


class SupportTooLargeError(NetExactError):
    code = "SUPPORT_TOO_LARGE"
    exit_status = 5
