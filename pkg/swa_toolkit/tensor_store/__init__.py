"""Named tensors, checkpoints and their bit-exact file format."""

from swa_toolkit.tensor_store.codec import (
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
    write_checkpoint,
)
from swa_toolkit.tensor_store.models import Checkpoint, DType, NamedTensor
from swa_toolkit.tensor_store.ops import check_compatible, checkpoint_l2_distance, incompatible_names

__all__ = [
    "Checkpoint",
    "DType",
    "NamedTensor",
    "check_compatible",
    "checkpoint_l2_distance",
    "decode_checkpoint",
    "encode_checkpoint",
    "incompatible_names",
    "read_checkpoint",
    "write_checkpoint",
]
