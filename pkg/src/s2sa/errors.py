"""Exception types shared across the toolkit.

Each carries the CLI exit code it maps to.
"""


class S2SAError(Exception):
    exit_code = 1


class ConfigError(S2SAError):
    """Bad or inconsistent configuration (unknown keys, mismatched vocabularies)."""

    exit_code = 1


class ShapeError(S2SAError, ValueError):
    exit_code = 1


class InvalidInputError(S2SAError, ValueError):
    exit_code = 2


class DataError(S2SAError):
    exit_code = 2


class CorpusParseError(DataError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class FormatError(DataError):
    """Checkpoint or vocabulary file is malformed."""


class NumericalError(S2SAError, ArithmeticError):
    exit_code = 3
