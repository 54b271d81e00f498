"""Exception types shared across the library.

Each failure mode that callers are expected to distinguish gets its own
class; the CLI maps them onto stable exit codes (see cli.py).
"""


class RespdenError(Exception):
    """Base class for all library errors."""


class ShapeError(RespdenError, ValueError):
    """Operand shapes are incompatible with an operation's contract."""


class NumericError(RespdenError, ArithmeticError):
    """A computation produced or received non-finite values."""


class UsageError(RespdenError, ValueError):
    """Invalid configuration or command-line input."""


class DatasetError(RespdenError, ValueError):
    """Malformed dataset file (annotation row, split file, WAV header)."""


class MissingAudioError(DatasetError):
    """An annotation references a WAV file that does not exist."""


class UndefinedMetricError(RespdenError, ValueError):
    """A metric is undefined because a truth stratum is empty."""


class TrainingError(RespdenError, RuntimeError):
    """Training aborted (non-finite loss or incompatible state)."""


class CheckpointError(RespdenError, ValueError):
    """Base class for checkpoint container problems."""


class BadMagicError(CheckpointError):
    """Checkpoint file does not start with the expected magic bytes."""


class VersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedError(CheckpointError):
    """Checkpoint file ended in the middle of a block."""
