"""Tensor and checkpoint types."""

import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.errors import SwaToolkitError, UnsupportedDTypeError

METADATA_KEY = "__metadata__"


class DType(str, Enum):
    """Floating-point dtypes a checkpoint can hold."""

    F32 = "F32"
    F64 = "F64"

    @property
    def numpy_dtype(self) -> np.dtype:
        """Little-endian numpy dtype used on disk."""
        return np.dtype("<f4") if self is DType.F32 else np.dtype("<f8")

    @property
    def itemsize(self) -> int:
        return self.numpy_dtype.itemsize

    @classmethod
    def from_numpy(cls, dtype: np.dtype) -> "DType":
        """Map a numpy dtype onto a checkpoint dtype.

        Raises:
            UnsupportedDTypeError: For anything but float32 / float64.
        """
        dtype = np.dtype(dtype)
        if dtype == np.float32:
            return cls.F32
        if dtype == np.float64:
            return cls.F64
        raise UnsupportedDTypeError(f"Unsupported dtype {dtype}; only float32 and float64 are stored")

    @classmethod
    def parse(cls, value: str) -> "DType":
        """Parse a dtype string as written in a file header."""
        try:
            return cls(value)
        except ValueError:
            raise UnsupportedDTypeError(f"Unsupported dtype string {value!r}") from None


@dataclass(frozen=True, eq=False)
class NamedTensor:
    """A named, shaped, floating-point array.

    The array is stored read-only and C-contiguous; ``shape == ()`` is a
    scalar holding one element.
    """

    name: str
    data: NDArray[np.floating]

    def __post_init__(self) -> None:
        if not self.name:
            raise SwaToolkitError("Tensor name must be non-empty")
        if self.name == METADATA_KEY:
            raise SwaToolkitError(f"Tensor name {METADATA_KEY!r} is reserved")
        dtype = DType.from_numpy(np.asarray(self.data).dtype)
        array = np.array(self.data, dtype=dtype.numpy_dtype.newbyteorder("="), order="C")
        array.setflags(write=False)
        object.__setattr__(self, "data", array)

    @property
    def dtype(self) -> DType:
        return DType.from_numpy(self.data.dtype)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.data.shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def nbytes(self) -> int:
        return self.size * self.dtype.itemsize

    def to_bytes(self) -> bytes:
        """Little-endian, row-major raw bytes."""
        return self.data.astype(self.dtype.numpy_dtype, copy=False).tobytes(order="C")

    def bit_equal(self, other: "NamedTensor") -> bool:
        """True when name, dtype, shape and every byte of data match."""
        return (
            self.name == other.name
            and self.dtype == other.dtype
            and self.shape == other.shape
            and self.to_bytes() == other.to_bytes()
        )


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """An immutable, name-ordered collection of tensors plus string metadata.

    Attributes:
        tensors: Mapping from tensor name to tensor, iterated in
            lexicographic name order.
        metadata: Free-form string to string map (epoch, phase, seed, ...).
    """

    tensors: Mapping[str, NamedTensor] = field(default_factory=dict)
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ordered: dict[str, NamedTensor] = {}
        for key in sorted(self.tensors):
            tensor = self.tensors[key]
            if tensor.name != key:
                raise SwaToolkitError(f"Tensor stored under {key!r} is named {tensor.name!r}")
            ordered[key] = tensor
        meta = {str(k): str(v) for k, v in sorted(self.metadata.items())}
        object.__setattr__(self, "tensors", MappingProxyType(ordered))
        object.__setattr__(self, "metadata", MappingProxyType(meta))

    @classmethod
    def from_arrays(
        cls,
        arrays: Mapping[str, Any],
        metadata: Mapping[str, str] | None = None,
    ) -> "Checkpoint":
        """Build a checkpoint from plain arrays keyed by name."""
        tensors = {name: NamedTensor(name, np.asarray(value)) for name, value in arrays.items()}
        return cls(tensors=tensors, metadata=dict(metadata or {}))

    def arrays(self) -> dict[str, NDArray[np.floating]]:
        """Name to (read-only) array, in lexicographic order."""
        return {name: tensor.data for name, tensor in self.tensors.items()}

    def names(self) -> list[str]:
        return list(self.tensors)

    def __iter__(self) -> Iterator[NamedTensor]:
        return iter(self.tensors.values())

    def __len__(self) -> int:
        return len(self.tensors)

    def __getitem__(self, name: str) -> NamedTensor:
        return self.tensors[name]

    def __contains__(self, name: object) -> bool:
        return name in self.tensors

    def with_metadata(self, **updates: str) -> "Checkpoint":
        """Copy with metadata entries added or replaced."""
        return Checkpoint(tensors=dict(self.tensors), metadata={**self.metadata, **updates})

    def bit_equal(self, other: "Checkpoint") -> bool:
        """True when both checkpoints hold bit-identical tensors and metadata."""
        if self.names() != other.names() or dict(self.metadata) != dict(other.metadata):
            return False
        return all(self[name].bit_equal(other[name]) for name in self.names())
