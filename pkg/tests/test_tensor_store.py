import json
import struct

import numpy as np
import pytest

from swa_toolkit.errors import CheckpointFormatError, IncompatibleCheckpointsError, UnsupportedDTypeError
from swa_toolkit.tensor_store import (
    Checkpoint,
    DType,
    NamedTensor,
    check_compatible,
    checkpoint_l2_distance,
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
    write_checkpoint,
)


def _random_checkpoint(rng: np.random.Generator) -> Checkpoint:
    arrays = {}
    for i in range(rng.integers(0, 5)):
        ndim = int(rng.integers(0, 4))
        shape = tuple(int(d) for d in rng.integers(0, 4, size=ndim))
        dtype = np.float32 if rng.random() < 0.5 else np.float64
        arrays[f"t{i}.{rng.integers(1000)}"] = rng.standard_normal(shape).astype(dtype)
    metadata = {"epoch": str(rng.integers(100))} if rng.random() < 0.5 else {}
    return Checkpoint.from_arrays(arrays, metadata)


def _raw_file(header: dict, data: bytes = b"") -> bytes:
    text = json.dumps(header).encode()
    return struct.pack("<Q", len(text)) + text + data


def test_named_tensor_is_read_only_copy():
    source = np.arange(6, dtype=np.float64).reshape(2, 3)
    tensor = NamedTensor("w", source)
    source[0, 0] = 99.0
    assert tensor.data[0, 0] == 0.0
    assert tensor.shape == (2, 3)
    assert tensor.nbytes == 48
    with pytest.raises(ValueError):
        tensor.data[0, 0] = 1.0


def test_named_tensor_rejects_integer_dtype():
    with pytest.raises(UnsupportedDTypeError):
        NamedTensor("w", np.arange(3))


def test_checkpoint_iterates_in_name_order():
    ckpt = Checkpoint.from_arrays({"b": np.zeros(1), "a": np.ones(2), "a.c": np.zeros(())})
    assert ckpt.names() == ["a", "a.c", "b"]
    assert [t.name for t in ckpt] == ["a", "a.c", "b"]


def test_roundtrip_is_bit_exact_over_random_checkpoints(tmp_path):
    rng = np.random.default_rng(7)
    path = tmp_path / "c.ckpt"
    for _ in range(1000):
        ckpt = _random_checkpoint(rng)
        write_checkpoint(ckpt, path)
        assert read_checkpoint(path).bit_equal(ckpt)


def test_roundtrip_preserves_nan_payload_and_negative_zero(tmp_path):
    values = np.array([np.nan, -0.0, np.inf, 1e-310], dtype=np.float64)
    ckpt = Checkpoint.from_arrays({"x": values})
    write_checkpoint(ckpt, tmp_path / "x.ckpt")
    back = read_checkpoint(tmp_path / "x.ckpt")
    assert back["x"].to_bytes() == ckpt["x"].to_bytes()


def test_scalar_and_empty_tensors(tmp_path):
    ckpt = Checkpoint.from_arrays({"s": np.float32(2.5), "e": np.zeros((0, 3))})
    back = decode_checkpoint(encode_checkpoint(ckpt))
    assert back["s"].shape == ()
    assert back["s"].data == np.float32(2.5)
    assert back["e"].shape == (0, 3)
    assert back["e"].nbytes == 0


def test_empty_checkpoint_roundtrip():
    assert decode_checkpoint(encode_checkpoint(Checkpoint())).names() == []


def test_encoding_is_deterministic_and_aligned():
    ckpt = Checkpoint.from_arrays({"w": np.arange(3, dtype=np.float32)}, {"epoch": "1"})
    a, b = encode_checkpoint(ckpt), encode_checkpoint(ckpt)
    assert a == b
    (header_len,) = struct.unpack_from("<Q", a)
    assert (8 + header_len) % 8 == 0
    header = json.loads(a[8 : 8 + header_len])
    assert list(header)[0] == "__metadata__"
    assert header["w"] == {"dtype": "F32", "shape": [3], "data_offsets": [0, 12]}


def test_truncated_file():
    with pytest.raises(CheckpointFormatError, match="too short"):
        decode_checkpoint(b"\x01\x02")


def test_header_length_beyond_file():
    with pytest.raises(CheckpointFormatError, match="exceeds file size"):
        decode_checkpoint(struct.pack("<Q", 1000) + b"{}")


def test_malformed_json_reports_byte_offset():
    text = b'{"w": {"dtype": "F32",, }}'
    with pytest.raises(CheckpointFormatError) as info:
        decode_checkpoint(struct.pack("<Q", len(text)) + text)
    assert info.value.offset == 8 + text.index(b",,") + 1
    assert "byte offset" in str(info.value)


def test_unknown_dtype():
    raw = _raw_file({"w": {"dtype": "I32", "shape": [1], "data_offsets": [0, 4]}}, b"\0" * 4)
    with pytest.raises(UnsupportedDTypeError, match="I32"):
        decode_checkpoint(raw)


def test_size_mismatch():
    raw = _raw_file({"w": {"dtype": "F64", "shape": [2], "data_offsets": [0, 8]}}, b"\0" * 8)
    with pytest.raises(CheckpointFormatError, match="needs 16"):
        decode_checkpoint(raw)


def test_offsets_out_of_range():
    raw = _raw_file({"w": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]}}, b"\0" * 4)
    with pytest.raises(CheckpointFormatError, match="outside data region"):
        decode_checkpoint(raw)


def test_overlapping_offsets():
    header = {
        "a": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]},
        "b": {"dtype": "F32", "shape": [2], "data_offsets": [4, 12]},
    }
    with pytest.raises(CheckpointFormatError, match="overlapping"):
        decode_checkpoint(_raw_file(header, b"\0" * 12))


def test_bad_metadata():
    with pytest.raises(CheckpointFormatError, match="__metadata__"):
        decode_checkpoint(_raw_file({"__metadata__": {"epoch": 1}}))


@pytest.mark.parametrize(
    "entry",
    [
        "not an object",
        {"dtype": "F32", "shape": [1]},
        {"dtype": "F32", "shape": [-1], "data_offsets": [0, 0]},
        {"dtype": "F32", "shape": [1], "data_offsets": [0]},
        {"dtype": 4, "shape": [1], "data_offsets": [0, 4]},
    ],
)
def test_bad_entries_are_structured_errors(entry):
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(_raw_file({"w": entry}, b"\0" * 4))


def test_random_corruption_never_crashes():
    rng = np.random.default_rng(0)
    payload = bytearray(encode_checkpoint(Checkpoint.from_arrays({"w": np.ones(4)}, {"k": "v"})))
    for _ in range(300):
        corrupt = bytearray(payload)
        for pos in rng.integers(0, len(corrupt), size=3):
            corrupt[pos] = int(rng.integers(256))
        try:
            decode_checkpoint(bytes(corrupt))
        except (CheckpointFormatError, UnsupportedDTypeError):
            pass


def test_read_missing_file_names_path(tmp_path):
    with pytest.raises(OSError, match="missing.ckpt"):
        read_checkpoint(tmp_path / "missing.ckpt")


def test_failed_write_leaves_no_file(tmp_path):
    target = tmp_path / "no_such_dir" / "c.ckpt"
    with pytest.raises(OSError):
        write_checkpoint(Checkpoint.from_arrays({"w": np.ones(1)}), target)
    assert not target.exists()


def test_compatibility_and_distance():
    a = Checkpoint.from_arrays({"w": np.zeros(2), "b": np.zeros(1)})
    b = Checkpoint.from_arrays({"w": np.array([3.0, 0.0]), "b": np.array([4.0])})
    check_compatible(a, b)
    assert checkpoint_l2_distance(a, b) == 5.0
    assert checkpoint_l2_distance(a, a) == 0.0

    c = Checkpoint.from_arrays({"w": np.zeros(3), "b": np.zeros(1, dtype=np.float32)})
    with pytest.raises(IncompatibleCheckpointsError) as info:
        check_compatible(a, c)
    assert info.value.names == ["b", "w"]


def test_dtype_parse():
    assert DType.parse("F64") is DType.F64
    with pytest.raises(UnsupportedDTypeError):
        DType.parse("BF16")


def test_duplicate_header_keys_are_rejected():
    entry = '{"dtype": "F64", "shape": [1], "data_offsets": [%d, %d]}'
    text = ('{"w": ' + entry % (0, 8) + ', "w": ' + entry % (8, 16) + "}").encode()
    data = np.array([1.0, 2.0]).tobytes()
    with pytest.raises(CheckpointFormatError, match="Duplicate key 'w'"):
        decode_checkpoint(struct.pack("<Q", len(text)) + text + data)


def test_deeply_nested_header_is_a_format_error():
    text = b"[" * 100_000
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(struct.pack("<Q", len(text)) + text)


def test_distance_matches_elementwise_loop():
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    expected = sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)) ** 0.5
    distance = checkpoint_l2_distance(Checkpoint.from_arrays({"w": a}), Checkpoint.from_arrays({"w": b}))
    assert distance == pytest.approx(expected, rel=1e-12)


def test_distance_is_a_metric():
    rng = np.random.default_rng(8)
    points = [
        Checkpoint.from_arrays({"w": rng.standard_normal((3, 4)), "b": rng.standard_normal(4)}) for _ in range(5)
    ]
    for x in points:
        assert checkpoint_l2_distance(x, x) == 0.0
        for y in points:
            assert checkpoint_l2_distance(x, y) == checkpoint_l2_distance(y, x)
            if x is not y:
                assert checkpoint_l2_distance(x, y) > 0.0
            for z in points:
                assert checkpoint_l2_distance(x, z) <= checkpoint_l2_distance(x, y) + checkpoint_l2_distance(y, z) + 1e-12


def test_with_metadata_keeps_tensors():
    ckpt = Checkpoint.from_arrays({"w": np.ones(2)}, {"epoch": "1"})
    updated = ckpt.with_metadata(epoch="2", phase="swa")
    assert dict(updated.metadata) == {"epoch": "2", "phase": "swa"}
    assert dict(ckpt.metadata) == {"epoch": "1"}
    np.testing.assert_array_equal(updated["w"].data, ckpt["w"].data)
