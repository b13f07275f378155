"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage problems exit 1, data and
validation problems exit 2, numeric failures exit 3.
"""


class HmtlError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class UsageError(HmtlError):
    exit_code = 1


class ConfigurationError(HmtlError, ValueError):
    pass


class DimensionError(HmtlError, ValueError):
    pass


class IngestionError(HmtlError, ValueError):
    pass


class FittingError(HmtlError, ValueError):
    pass


class UndefinedMetricError(HmtlError, ValueError):
    pass


class CheckpointError(HmtlError):
    pass


class NumericError(HmtlError, ArithmeticError):
    exit_code = 3
