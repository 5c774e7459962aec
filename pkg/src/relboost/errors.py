"""Error taxonomy shared across the package.

Each error class carries the process exit code the CLI maps it to.
"""


class RelboostError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(RelboostError):
    """Invalid configuration value or infeasible generator settings."""

    exit_code = 2


class ParseError(RelboostError):
    """Malformed input file; carries the offending location."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class SchemaError(RelboostError):
    """Type or arity violation against the declared predicate schemas."""

    exit_code = 4


class ClauseError(SchemaError):
    """Ill-formed conjunction, e.g. a negated literal with an unbound variable."""


class TrainingError(RelboostError):
    """Training cannot proceed (empty example class, bad stage count, ...)."""

    exit_code = 5


class EvaluationError(RelboostError):
    """Evaluation is undefined for the given inputs (empty or single-class)."""

    exit_code = 6
