"""Checkpoint file codec.

Layout:
    bytes 0-7      unsigned 64-bit little-endian N, the header length
    bytes 8..8+N   UTF-8 JSON header: optional "__metadata__" map, then one
                   entry per tensor {"dtype", "shape", "data_offsets"} in
                   lexicographic name order; padded with spaces to an
                   8-byte boundary
    bytes 8+N..    raw little-endian row-major tensor data, contiguous and in
                   header order; data_offsets are relative to byte 8+N
"""

import json
import logging
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from swa_toolkit.errors import CheckpointFormatError, UnsupportedDTypeError
from swa_toolkit.fileio import atomic_path
from swa_toolkit.tensor_store.models import METADATA_KEY, Checkpoint, DType, NamedTensor

logger = logging.getLogger(__name__)

_HEADER_LEN = struct.Struct("<Q")
_ALIGNMENT = 8


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    """Serialize a checkpoint to the on-disk byte layout."""
    header: dict[str, Any] = {}
    if ckpt.metadata:
        header[METADATA_KEY] = dict(ckpt.metadata)

    offset = 0
    for tensor in ckpt:
        header[tensor.name] = {
            "dtype": tensor.dtype.value,
            "shape": list(tensor.shape),
            "data_offsets": [offset, offset + tensor.nbytes],
        }
        offset += tensor.nbytes

    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    pad = (_ALIGNMENT - (_HEADER_LEN.size + len(header_bytes)) % _ALIGNMENT) % _ALIGNMENT
    header_bytes += b" " * pad

    chunks = [_HEADER_LEN.pack(len(header_bytes)), header_bytes]
    chunks.extend(tensor.to_bytes() for tensor in ckpt)
    return b"".join(chunks)


def write_checkpoint(ckpt: Checkpoint, path: Path | str) -> None:
    """Write a checkpoint atomically.

    Writing the same checkpoint twice produces byte-identical files.

    Raises:
        OSError: If the file cannot be written; the message names ``path``.
    """
    path = Path(path)
    payload = encode_checkpoint(ckpt)
    try:
        with atomic_path(path) as tmp:
            tmp.write_bytes(payload)
    except OSError as e:
        raise OSError(f"Cannot write checkpoint {path}: {e}") from e
    logger.debug(f"Wrote checkpoint {path} ({len(ckpt)} tensors, {len(payload)} bytes)")


def decode_checkpoint(buffer: bytes, path: Path | None = None) -> Checkpoint:
    """Parse the on-disk byte layout into a checkpoint.

    Raises:
        CheckpointFormatError: Malformed header JSON (with byte offset),
            header length beyond the file, bad entries, out-of-range or
            overlapping data offsets.
        UnsupportedDTypeError: A dtype string other than F32 / F64.
    """
    if len(buffer) < _HEADER_LEN.size:
        raise CheckpointFormatError(f"File is {len(buffer)} bytes, too short for a header length", path)
    (header_len,) = _HEADER_LEN.unpack_from(buffer, 0)
    data_start = _HEADER_LEN.size + header_len
    if data_start > len(buffer):
        raise CheckpointFormatError(
            f"Header length {header_len} exceeds file size {len(buffer)}", path
        )

    try:
        text = buffer[_HEADER_LEN.size : data_start].decode("utf-8")
    except UnicodeDecodeError as e:
        raise CheckpointFormatError("Header is not valid UTF-8", path, offset=_HEADER_LEN.size + e.start) from e
    try:
        header = json.loads(text, object_pairs_hook=lambda pairs: _unique_keys(pairs, path))
    except json.JSONDecodeError as e:
        offset = _HEADER_LEN.size + len(text[: e.pos].encode("utf-8"))
        raise CheckpointFormatError(f"Malformed header JSON: {e.msg}", path, offset=offset) from e
    except RecursionError:
        raise CheckpointFormatError("Header JSON is nested too deeply", path) from None
    if not isinstance(header, dict):
        raise CheckpointFormatError("Header must be a JSON object", path)

    metadata = header.pop(METADATA_KEY, {})
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise CheckpointFormatError(f"{METADATA_KEY} must map strings to strings", path)

    data = memoryview(buffer)[data_start:]
    spans: list[tuple[int, int, str]] = []
    tensors: dict[str, NamedTensor] = {}
    for name, entry in header.items():
        dtype, shape, begin, end = _parse_entry(name, entry, path)
        if not 0 <= begin <= end <= len(data):
            raise CheckpointFormatError(
                f"Tensor {name!r} data_offsets [{begin}, {end}] outside data region of {len(data)} bytes", path
            )
        expected = math.prod(shape) * dtype.itemsize
        if end - begin != expected:
            raise CheckpointFormatError(
                f"Tensor {name!r} spans {end - begin} bytes but shape {shape} of {dtype.value} needs {expected}",
                path,
            )
        spans.append((begin, end, name))
        array = np.frombuffer(data[begin:end], dtype=dtype.numpy_dtype).reshape(shape)
        tensors[name] = NamedTensor(name, array)

    reach, reach_name = 0, ""
    for begin, end, name in sorted(s for s in spans if s[1] > s[0]):
        if begin < reach:
            raise CheckpointFormatError(f"Tensors {reach_name!r} and {name!r} have overlapping data", path)
        reach, reach_name = end, name

    return Checkpoint(tensors=tensors, metadata=metadata)


def _unique_keys(pairs: list[tuple[str, Any]], path: Path | None) -> dict[str, Any]:
    obj: dict[str, Any] = {}
    for key, value in pairs:
        if key in obj:
            raise CheckpointFormatError(f"Duplicate key {key!r} in header", path)
        obj[key] = value
    return obj


def _parse_entry(name: str, entry: Any, path: Path | None) -> tuple[DType, tuple[int, ...], int, int]:
    if not name:
        raise CheckpointFormatError("Empty tensor name in header", path)
    if not isinstance(entry, dict):
        raise CheckpointFormatError(f"Header entry for {name!r} is not an object", path)
    missing = {"dtype", "shape", "data_offsets"} - entry.keys()
    if missing:
        raise CheckpointFormatError(f"Header entry for {name!r} lacks {sorted(missing)}", path)

    raw_dtype = entry["dtype"]
    if not isinstance(raw_dtype, str):
        raise CheckpointFormatError(f"dtype of {name!r} must be a string", path)
    try:
        dtype = DType.parse(raw_dtype)
    except UnsupportedDTypeError as e:
        raise UnsupportedDTypeError(f"{path}: tensor {name!r}: {e}" if path else f"tensor {name!r}: {e}") from None

    shape = entry["shape"]
    if not isinstance(shape, list) or not all(_is_index(d) for d in shape):
        raise CheckpointFormatError(f"shape of {name!r} must be a list of non-negative integers", path)

    offsets = entry["data_offsets"]
    if not isinstance(offsets, list) or len(offsets) != 2 or not all(_is_index(o) for o in offsets):
        raise CheckpointFormatError(f"data_offsets of {name!r} must be two non-negative integers", path)

    return dtype, tuple(shape), offsets[0], offsets[1]


def _is_index(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def read_checkpoint(path: Path | str) -> Checkpoint:
    """Read a checkpoint written by :func:`write_checkpoint`.

    Raises:
        OSError: If the file cannot be read; the message names ``path``.
        CheckpointFormatError: If the file is malformed.
        UnsupportedDTypeError: If a tensor has an unknown dtype string.
    """
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as e:
        raise OSError(f"Cannot read checkpoint {path}: {e}") from e
    ckpt = decode_checkpoint(buffer, path)
    logger.debug(f"Read checkpoint {path} ({len(ckpt)} tensors)")
    return ckpt
