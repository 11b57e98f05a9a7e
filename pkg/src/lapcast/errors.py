"""Exception taxonomy and process exit codes.

Exit codes: 0 success, 1 usage/config, 2 data integrity, 3 numerical
divergence.
"""


class LapcastError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ShapeError(LapcastError, ValueError):
    """Operand shapes do not conform."""

    exit_code = 1


class ConfigError(LapcastError):
    """Invalid configuration or usage."""

    exit_code = 1


class DomainError(LapcastError, ValueError):
    """An argument is outside a function's mathematical domain."""

    exit_code = 1


class ModeError(ConfigError):
    """Requested forecast mode is unavailable for the given inputs."""


class DataError(LapcastError):
    """Base class for data problems."""

    exit_code = 2


class ParseError(DataError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrityError(DataError):
    """Records violate a dataset invariant (e.g. ranks not a permutation)."""


class GapError(DataError):
    """A race is missing laps required by a downstream computation."""


class ContextError(DataError):
    """Not enough observed history to start a forecast."""


class MetricError(DataError):
    """A metric is undefined on the given evaluation points."""


class CheckpointError(DataError):
    """Checkpoint file is unreadable or structurally invalid."""


class SchemaVersionError(CheckpointError):
    """Checkpoint schema version is not supported by this build."""


class DivergenceError(LapcastError):
    """Training produced a non-finite loss."""

    exit_code = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, LapcastError):
        return exc.exit_code
    return 1
