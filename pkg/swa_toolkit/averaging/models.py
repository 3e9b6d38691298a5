"""Averaging window and tensor skip policies."""

from collections.abc import Callable, Iterable
from fnmatch import fnmatchcase
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

SkipPolicy = Callable[[str], bool]

# BN batch counters are step counts, not weights.
DEFAULT_SKIP_PATTERNS = ("*.num_batches",)


def skip_nothing(name: str) -> bool:
    return False


def glob_skip_policy(patterns: Iterable[str]) -> SkipPolicy:
    """Skip tensors whose name matches any of the glob patterns (case-sensitive)."""
    compiled = tuple(patterns)

    def policy(name: str) -> bool:
        return any(fnmatchcase(name, pattern) for pattern in compiled)

    return policy


class AveragingWindow(BaseModel):
    """Checkpoints of epochs ``m .. n`` (1-indexed, inclusive), in order."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    paths: tuple[Path, ...]

    @model_validator(mode="after")
    def _check_span(self) -> "AveragingWindow":
        if self.m > self.n:
            raise ValueError(f"Window start {self.m} is after its end {self.n}")
        if len(self.paths) != self.n - self.m + 1:
            raise ValueError(f"Window {self.m}-{self.n} needs {self.n - self.m + 1} paths, got {len(self.paths)}")
        return self

    @classmethod
    def over(cls, paths: Iterable[Path | str], start: int = 1) -> "AveragingWindow":
        """Window covering ``paths`` as consecutive epochs from ``start``."""
        resolved = tuple(Path(p) for p in paths)
        return cls(m=start, n=start + len(resolved) - 1, paths=resolved)

    @property
    def label(self) -> str:
        return f"{self.m}-{self.n}"
