"""Stochastic weight averaging: the arithmetic mean of a window of checkpoints."""

from swa_toolkit.averaging.models import (
    DEFAULT_SKIP_PATTERNS,
    AveragingWindow,
    SkipPolicy,
    glob_skip_policy,
    skip_nothing,
)
from swa_toolkit.averaging.running import RunningAverage
from swa_toolkit.averaging.window import average_window

__all__ = [
    "DEFAULT_SKIP_PATTERNS",
    "AveragingWindow",
    "RunningAverage",
    "SkipPolicy",
    "average_window",
    "glob_skip_policy",
    "skip_nothing",
]
