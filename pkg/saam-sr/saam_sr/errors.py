"""Exception hierarchy for saam-sr."""

from __future__ import annotations


class SaamError(Exception):
    """Base class for every error raised by saam-sr."""


class DimensionError(SaamError, ValueError):
    """Tensor shapes are incompatible with an operation."""


class ArgumentError(SaamError, ValueError):
    """An argument is malformed (empty vector, wrong length, non-scalar loss)."""


class ScaleRangeError(SaamError, ValueError):
    """A magnification factor lies outside the accepted range."""


class ConfigError(SaamError):
    """Invalid configuration value or unknown configuration key."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(SaamError):
    """Training or evaluation data is missing or unusable."""


class NonFiniteLossError(SaamError):
    """Training produced a NaN/Inf loss."""

    def __init__(self, step: int, last_finite: list[float]) -> None:
        tail = ", ".join(f"{v:.6g}" for v in last_finite) or "(none)"
        super().__init__(
            f"non-finite loss at step {step}; last finite totals: {tail}"
        )
        self.step = step
        self.last_finite = last_finite


class CheckpointError(SaamError):
    """Checkpoint file could not be read or does not fit the model."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic."""


class CrcMismatchError(CheckpointError):
    """Trailing CRC-32 does not match the file contents (corrupt or truncated)."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class TensorMismatchError(CheckpointError):
    """A stored tensor is missing, unexpected or has the wrong shape."""

    def __init__(self, name: str, message: str) -> None:
        super().__init__(f"tensor '{name}': {message}")
        self.name = name


class EchoMismatchError(CheckpointError):
    """The stored configuration echo disagrees with the requested architecture."""

    def __init__(self, field: str, stored: object, requested: object) -> None:
        super().__init__(
            f"config field '{field}': checkpoint has {stored!r}, requested {requested!r}"
        )
        self.field = field
