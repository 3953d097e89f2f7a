"""Exception hierarchy shared across the package."""


class NasranError(Exception):
    """Base class for all package errors."""


class ConfigError(NasranError, ValueError):
    """Invalid configuration value. ``keys`` names the offending field(s)."""

    def __init__(self, message, keys=(), line=None):
        self.keys = tuple(keys)
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(NasranError, ValueError):
    """Input array does not match the shape a model expects."""


class TrainingAborted(NasranError, RuntimeError):
    def __init__(self, message, epoch=None, batch=None):
        self.epoch = epoch
        self.batch = batch
        super().__init__(message)


class CheckpointError(NasranError):
    """Base class for checkpoint decoding failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """File ended before the declared content."""


class CheckpointSpecError(CheckpointError):
    """Spec block is malformed or inconsistent with the payload."""


class RegistryError(NasranError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
