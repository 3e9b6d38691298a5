"""Exception hierarchy shared by all swa_toolkit modules.

Each error also derives from the builtin a caller would naturally catch
(``ValueError`` for bad data, ``RuntimeError`` for failures while running),
so code that only knows about builtins keeps working.
"""

from pathlib import Path


class SwaToolkitError(Exception):
    """Base class for every error raised by swa_toolkit."""


class CheckpointFormatError(SwaToolkitError, ValueError):
    """A checkpoint file is malformed or structurally inconsistent."""

    def __init__(self, message: str, path: Path | None = None, offset: int | None = None) -> None:
        self.path = path
        self.offset = offset
        details = message
        if offset is not None:
            details = f"{details} (byte offset {offset})"
        if path is not None:
            details = f"{path}: {details}"
        super().__init__(details)


class UnsupportedDTypeError(SwaToolkitError, ValueError):
    """A tensor uses a dtype outside {F32, F64}."""


class IncompatibleCheckpointsError(SwaToolkitError, ValueError):
    """Two checkpoints differ in tensor names, shapes or dtypes."""

    def __init__(self, message: str, names: list[str] | None = None) -> None:
        self.names = names or []
        if self.names:
            message = f"{message}: {', '.join(self.names)}"
        super().__init__(message)


class ScheduleRangeError(SwaToolkitError, ValueError):
    """An epoch or iteration index lies outside a schedule's range."""


class NumericError(SwaToolkitError, RuntimeError):
    """A computation produced non-finite values."""

    def __init__(self, message: str, layer: str | None = None) -> None:
        self.layer = layer
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)


class DatasetError(SwaToolkitError, ValueError):
    """A dataset cannot be generated, loaded or used as requested."""


class ConfigError(SwaToolkitError, ValueError):
    """A configuration file cannot be read or is invalid."""


class TrainingError(SwaToolkitError, RuntimeError):
    """A training run aborted; records where it stopped."""

    def __init__(self, message: str, phase: str, epoch: int, iteration: int | None = None) -> None:
        self.phase = phase
        self.epoch = epoch
        self.iteration = iteration
        where = f"{phase} epoch {epoch}"
        if iteration is not None:
            where = f"{where}, iteration {iteration}"
        super().__init__(f"{where}: {message}")
