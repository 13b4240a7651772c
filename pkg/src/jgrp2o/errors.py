"""Exception types shared across the package.

Shape and validation problems raise subclasses of ValueError so that
callers who do not care about the distinction can catch the builtin.
"""


class ShapeError(ValueError):
    """Operand dimensions do not satisfy an operation's contract."""


class ValidationError(ValueError):
    """Inputs are structurally well-formed but violate a documented rule."""


class ConfigError(ValueError):
    """Bad configuration key, value, or file."""


class DataError(RuntimeError):
    """A dataset or frame cannot be processed (empty crop, bad depth, ...)."""


class ContractViolation(RuntimeError):
    """A runtime contract between modules was broken (e.g. unnormalized voting weights)."""


class DeterminismError(RuntimeError):
    """A computation that must be deterministic produced two different results."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN/Inf loss term."""

    def __init__(self, message, stage=None, term=None):
        super().__init__(message)
        self.stage = stage
        self.term = term


class CheckpointFormatError(RuntimeError):
    """Checkpoint file is corrupt or truncated; `offset` is the failing byte position."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CheckpointVersionError(RuntimeError):
    """Checkpoint was written by an unsupported format version."""
