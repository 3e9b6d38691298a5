"""Operations over pairs of checkpoints."""

import math

import numpy as np

from swa_toolkit.errors import IncompatibleCheckpointsError
from swa_toolkit.tensor_store.models import Checkpoint


def incompatible_names(a: Checkpoint, b: Checkpoint) -> list[str]:
    """Names that are missing from one side or differ in shape or dtype."""
    names_a, names_b = set(a.names()), set(b.names())
    offending = sorted(names_a ^ names_b)
    for name in sorted(names_a & names_b):
        if a[name].shape != b[name].shape or a[name].dtype != b[name].dtype:
            offending.append(name)
    return offending


def check_compatible(a: Checkpoint, b: Checkpoint) -> None:
    """Raise if the checkpoints differ in name sets, shapes or dtypes.

    Raises:
        IncompatibleCheckpointsError: Listing every offending name.
    """
    offending = incompatible_names(a, b)
    if offending:
        raise IncompatibleCheckpointsError("Checkpoints are incompatible", names=offending)


def checkpoint_l2_distance(a: Checkpoint, b: Checkpoint) -> float:
    """Euclidean distance between two compatible checkpoints.

    All tensors are treated as one flat vector; differences are squared and
    summed in float64.
    """
    check_compatible(a, b)
    total = 0.0
    for name in a.names():
        diff = a[name].data.astype(np.float64) - b[name].data.astype(np.float64)
        total += float(np.dot(diff.ravel(), diff.ravel()))
    return math.sqrt(total)
