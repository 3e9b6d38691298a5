import time

import numpy as np
import pytest
from pydantic import ValidationError

from swa_toolkit.averaging import (
    AveragingWindow,
    RunningAverage,
    average_window,
    glob_skip_policy,
)
from swa_toolkit.errors import IncompatibleCheckpointsError
from swa_toolkit.tensor_store import Checkpoint, DType, read_checkpoint, write_checkpoint


def _ckpt(w, b, counter=0.0, dtype=np.float64) -> Checkpoint:
    return Checkpoint.from_arrays(
        {
            "layers.0.weight": np.asarray(w, dtype=dtype),
            "layers.0.bias": np.asarray(b, dtype=dtype),
            "bn.0.num_batches": np.asarray(counter, dtype=np.float64),
        }
    )


def _average(ckpts, skip_policy=None):
    acc = RunningAverage.start(ckpts[0], skip_policy) if skip_policy else RunningAverage.start(ckpts[0])
    for ckpt in ckpts[1:]:
        acc.update(ckpt)
    return acc.finalize()


def test_two_point_mean():
    result = _average([_ckpt([[1.0, 2.0]], [0.0]), _ckpt([[3.0, 6.0]], [1.0])])
    np.testing.assert_array_equal(result["layers.0.weight"].data, [[2.0, 4.0]])
    np.testing.assert_array_equal(result["layers.0.bias"].data, [0.5])
    assert result.metadata == {"count": "2", "window": "1-2"}


def test_single_checkpoint_average_is_identity():
    ckpt = _ckpt(np.random.default_rng(0).standard_normal((3, 2)), [1.0, 2.0], counter=5.0)
    result = _average([ckpt])
    for name in ckpt.names():
        assert result[name].bit_equal(ckpt[name])


def test_identical_checkpoints_average_to_themselves():
    ckpt = _ckpt([[0.1, 0.7]], [0.3])
    result = _average([ckpt] * 5)
    np.testing.assert_allclose(result["layers.0.weight"].data, [[0.1, 0.7]], rtol=1e-15)


def test_skipped_tensors_come_from_the_first_checkpoint():
    ckpts = [_ckpt([[i]], [i], counter=float(10 * (i + 1))) for i in range(3)]
    result = _average(ckpts, glob_skip_policy(["*.num_batches"]))
    assert float(result["bn.0.num_batches"].data) == 10.0
    assert float(result["layers.0.weight"].data[0, 0]) == 1.0


def test_source_dtype_is_kept_and_can_be_overridden():
    ckpts = [_ckpt([[1.0]], [1.0], dtype=np.float32), _ckpt([[2.0]], [2.0], dtype=np.float32)]
    acc = RunningAverage.start(ckpts[0]).update(ckpts[1])
    assert acc.finalize()["layers.0.weight"].dtype is DType.F32
    assert acc.finalize(DType.F64)["layers.0.weight"].dtype is DType.F64


def test_mismatch_names_first_offending_tensor():
    acc = RunningAverage.start(_ckpt([[1.0, 2.0]], [0.0]))
    with pytest.raises(IncompatibleCheckpointsError) as info:
        acc.update(_ckpt([[1.0, 2.0, 3.0]], [0.0]))
    assert info.value.names == ["layers.0.weight"]
    with pytest.raises(IncompatibleCheckpointsError) as info:
        acc.update(_ckpt([[1.0, 2.0]], [0.0], dtype=np.float32))
    assert info.value.names == ["layers.0.bias"]
    extra = Checkpoint.from_arrays({**_ckpt([[1.0, 2.0]], [0.0]).arrays(), "extra": np.zeros(1)})
    with pytest.raises(IncompatibleCheckpointsError, match="extra"):
        acc.update(extra)
    assert acc.count == 1


def test_streaming_matches_batch_oracle_under_permutation():
    rng = np.random.default_rng(1234)
    shapes = {"a": (7, 5), "b": (5,), "c": ()}
    ckpts = [
        Checkpoint.from_arrays({name: rng.standard_normal(shape) * 10.0 for name, shape in shapes.items()})
        for _ in range(48)
    ]
    oracle = {name: sum(c[name].data for c in ckpts) / len(ckpts) for name in shapes}
    start = time.perf_counter()
    for _ in range(5):
        order = rng.permutation(len(ckpts))
        result = _average([ckpts[i] for i in order])
        for name in shapes:
            np.testing.assert_allclose(result[name].data, oracle[name], rtol=1e-12, atol=1e-12)
    assert time.perf_counter() - start < 5.0


def test_window_validation():
    with pytest.raises(ValidationError):
        AveragingWindow(m=3, n=2, paths=())
    with pytest.raises(ValidationError):
        AveragingWindow(m=1, n=3, paths=("a", "b"))
    window = AveragingWindow.over(["a", "b", "c"], start=4)
    assert (window.m, window.n, window.label) == (4, 6, "4-6")


def test_average_window_writes_mean(tmp_path):
    paths = []
    for i in range(3):
        path = tmp_path / f"e{i + 1}.ckpt"
        write_checkpoint(_ckpt([[float(i)]], [2.0 * i]), path)
        paths.append(path)
    out = average_window(AveragingWindow.over(paths), tmp_path / "swa.ckpt")
    result = read_checkpoint(out)
    assert float(result["layers.0.weight"].data[0, 0]) == 1.0
    assert float(result["layers.0.bias"].data[0]) == 2.0
    assert result.metadata["window"] == "1-3"


def test_average_window_failure_leaves_no_output(tmp_path):
    good = tmp_path / "e1.ckpt"
    write_checkpoint(_ckpt([[1.0]], [1.0]), good)
    bad = tmp_path / "e2.ckpt"
    write_checkpoint(_ckpt([[1.0, 2.0]], [1.0]), bad)
    out = tmp_path / "swa.ckpt"
    with pytest.raises(IncompatibleCheckpointsError, match="e2.ckpt"):
        average_window(AveragingWindow.over([good, bad]), out)
    with pytest.raises(OSError):
        average_window(AveragingWindow.over([good, tmp_path / "missing.ckpt"]), out)
    assert not out.exists()


def test_six_epoch_window_of_epoch_indices(tmp_path):
    paths = []
    for epoch in range(1, 7):
        path = tmp_path / f"swa_epoch_{epoch:03d}.ckpt"
        write_checkpoint(Checkpoint.from_arrays({"w": np.full((2, 3), float(epoch))}), path)
        paths.append(path)
    result = read_checkpoint(average_window(AveragingWindow.over(paths), tmp_path / "swa_1-6.ckpt"))
    np.testing.assert_array_equal(result["w"].data, np.full((2, 3), 3.5))
    assert result.metadata == {"count": "6", "window": "1-6"}


def test_average_is_affine():
    rng = np.random.default_rng(5)
    ckpts = [Checkpoint.from_arrays({"w": rng.standard_normal(20)}) for _ in range(10)]
    scaled = [Checkpoint.from_arrays({"w": 3.0 * c["w"].data - 2.0}) for c in ckpts]
    mean = _average(ckpts)["w"].data
    np.testing.assert_allclose(_average(scaled)["w"].data, 3.0 * mean - 2.0, rtol=1e-12, atol=1e-12)


def test_average_stays_within_elementwise_range():
    rng = np.random.default_rng(6)
    stack = rng.standard_normal((30, 50)) * rng.uniform(0.1, 100.0, size=50)
    result = _average([Checkpoint.from_arrays({"w": row}) for row in stack])["w"].data
    low, high = stack.min(axis=0), stack.max(axis=0)
    slack = 1e-12 * np.maximum(np.abs(low), np.abs(high))
    assert np.all(result >= low - slack)
    assert np.all(result <= high + slack)


def test_narrowed_output_matches_narrowed_batch_oracle():
    rng = np.random.default_rng(9)
    ckpts = [Checkpoint.from_arrays({"w": rng.standard_normal(40).astype(np.float32)}) for _ in range(48)]
    acc = RunningAverage.start(ckpts[0])
    for ckpt in ckpts[1:]:
        acc.update(ckpt)
    result = acc.finalize(DType.F32)["w"].data
    oracle = (sum(c["w"].data.astype(np.float64) for c in ckpts) / len(ckpts)).astype(np.float32)
    assert result.dtype == np.float32
    np.testing.assert_array_max_ulp(result, oracle, maxulp=1)


def test_skipped_names_follow_the_policy():
    acc = RunningAverage.start(_ckpt([[1.0]], [0.0]), glob_skip_policy(["*.num_batches"]))
    assert acc.skipped_names == frozenset({"bn.0.num_batches"})
    assert RunningAverage.start(_ckpt([[1.0]], [0.0])).skipped_names == frozenset()
