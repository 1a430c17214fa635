"""Exception types; each maps to a CLI exit code."""


class MllpError(Exception):
    exit_code = 1


class ConfigError(MllpError, ValueError):
    exit_code = 2


class DataError(MllpError, ValueError):
    exit_code = 3


class NumericError(MllpError, ArithmeticError):
    exit_code = 4


class DimensionError(MllpError, ValueError):
    """Operand shapes do not chain."""

    exit_code = 2
