"""Streaming arithmetic mean of checkpoints."""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.averaging.models import SkipPolicy, skip_nothing
from swa_toolkit.errors import IncompatibleCheckpointsError
from swa_toolkit.tensor_store.models import Checkpoint, DType, NamedTensor

logger = logging.getLogger(__name__)


@dataclass
class RunningAverage:
    """Accumulates the elementwise mean of a stream of compatible checkpoints.

    Averaged tensors are held as float64 accumulators updated with
    ``mean += (x - mean) / count``. Tensors selected by the skip policy are
    carried verbatim from the first checkpoint.

    Attributes:
        count: Number of checkpoints absorbed so far.
        mean: float64 accumulators for every averaged tensor.
        skipped: Tensors carried from the first checkpoint.
        signature: Name to (shape, dtype) of the first checkpoint; every
            later checkpoint must match it exactly.
    """

    count: int
    mean: dict[str, NDArray[np.float64]]
    skipped: dict[str, NamedTensor]
    signature: dict[str, tuple[tuple[int, ...], DType]] = field(repr=False)

    @classmethod
    def start(cls, first: Checkpoint, skip_policy: SkipPolicy = skip_nothing) -> "RunningAverage":
        """Begin an average with ``first`` as its only member."""
        mean: dict[str, NDArray[np.float64]] = {}
        skipped: dict[str, NamedTensor] = {}
        for tensor in first:
            if skip_policy(tensor.name):
                skipped[tensor.name] = tensor
            else:
                mean[tensor.name] = tensor.data.astype(np.float64, copy=True)
        signature = {t.name: (t.shape, t.dtype) for t in first}
        if skipped:
            logger.debug(f"Carrying {sorted(skipped)} from the first checkpoint without averaging")
        return cls(count=1, mean=mean, skipped=skipped, signature=signature)

    @property
    def skipped_names(self) -> frozenset[str]:
        return frozenset(self.skipped)

    def _first_mismatch(self, ckpt: Checkpoint) -> str | None:
        for name in sorted(set(self.signature) | set(ckpt.names())):
            if name not in self.signature or name not in ckpt:
                return name
            tensor = ckpt[name]
            if (tensor.shape, tensor.dtype) != self.signature[name]:
                return name
        return None

    def update(self, ckpt: Checkpoint) -> "RunningAverage":
        """Absorb one more checkpoint into the mean (in place).

        Raises:
            IncompatibleCheckpointsError: Naming the first tensor whose
                presence, shape or dtype differs from the first checkpoint.
        """
        mismatch = self._first_mismatch(ckpt)
        if mismatch is not None:
            raise IncompatibleCheckpointsError("Checkpoint does not match the running average", names=[mismatch])
        self.count += 1
        for name, acc in self.mean.items():
            acc += (ckpt[name].data.astype(np.float64) - acc) / self.count
        return self

    def finalize(self, out_dtype: DType | None = None, window: str | None = None) -> Checkpoint:
        """Materialize the mean as a checkpoint.

        Args:
            out_dtype: dtype for averaged tensors; ``None`` keeps each
                tensor's source dtype. Narrowing rounds to nearest even.
            window: Description recorded in metadata, ``1-<count>`` by default.
        """
        tensors: dict[str, NamedTensor] = dict(self.skipped)
        for name, acc in self.mean.items():
            dtype = out_dtype or self.signature[name][1]
            tensors[name] = NamedTensor(name, acc.astype(dtype.numpy_dtype))
        metadata = {"count": str(self.count), "window": window or f"1-{self.count}"}
        return Checkpoint(tensors=tensors, metadata=metadata)
