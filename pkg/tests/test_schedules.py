import csv
import math
import time

import numpy as np
import pytest
from pydantic import ValidationError

from swa_toolkit.errors import ScheduleRangeError
from swa_toolkit.schedules import (
    CosineCycleSpec,
    StepScheduleSpec,
    cyclical_cosine_lr,
    emit_schedule,
    lr_at,
    one_x_schedule,
    step_ending_lr,
    step_lr,
    two_x_schedule,
    write_schedule_csv,
)


def test_one_x_schedule():
    spec = one_x_schedule(0.02)
    assert [step_lr(spec, e) for e in (1, 8)] == [0.02, 0.02]
    assert step_lr(spec, 9) == pytest.approx(0.002, rel=1e-15)
    assert step_lr(spec, 12) == pytest.approx(0.0002, rel=1e-15)
    assert step_ending_lr(spec) == step_lr(spec, 12)


def test_two_x_schedule_decays():
    spec = two_x_schedule(0.02)
    assert step_lr(spec, 16) == 0.02
    assert step_lr(spec, 17) == pytest.approx(0.002)
    assert step_lr(spec, 23) == pytest.approx(0.0002)
    assert spec.total_epochs == 24


def test_fixed_schedule():
    spec = StepScheduleSpec(base_lr=0.02, total_epochs=16)
    assert {step_lr(spec, e) for e in range(1, 17)} == {0.02}


def test_step_out_of_range():
    spec = one_x_schedule()
    for epoch in (0, 13):
        with pytest.raises(ScheduleRangeError):
            step_lr(spec, epoch)


def test_step_spec_validation():
    with pytest.raises(ValidationError):
        StepScheduleSpec(base_lr=0.1, decay_epochs=(5, 3), total_epochs=10)
    with pytest.raises(ValidationError):
        StepScheduleSpec(base_lr=0.1, decay_epochs=(11,), total_epochs=10)
    with pytest.raises(ValidationError):
        StepScheduleSpec(base_lr=0.0, total_epochs=10)


def test_cosine_endpoints_and_midpoint():
    spec = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=1000, num_cycles=12)
    assert cyclical_cosine_lr(spec, 0) == 0.02
    assert cyclical_cosine_lr(spec, 999) == 0.0002
    assert cyclical_cosine_lr(spec, 1000) == 0.02
    spec3 = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=3)
    assert cyclical_cosine_lr(spec3, 1) == pytest.approx(0.0101, rel=1e-12)


def test_cosine_is_monotone_within_a_cycle():
    spec = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=50, num_cycles=2)
    values = [cyclical_cosine_lr(spec, t) for t in range(50)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_cosine_single_iteration_cycle_and_constant_rate():
    one = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=1, num_cycles=4)
    assert [cyclical_cosine_lr(one, t) for t in range(4)] == [0.02] * 4
    flat = CosineCycleSpec(lr_max=0.002, lr_min=0.002, cycle_len_iters=10)
    assert {cyclical_cosine_lr(flat, t) for t in range(10)} == {0.002}


def test_cosine_range_and_validation():
    spec = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=10, num_cycles=2)
    for t in (-1, 20):
        with pytest.raises(ScheduleRangeError):
            cyclical_cosine_lr(spec, t)
    with pytest.raises(ValidationError):
        CosineCycleSpec(lr_max=0.001, lr_min=0.01, cycle_len_iters=10)


def test_cosine_matches_closed_form_oracle():
    rng = np.random.default_rng(42)
    cases = []
    for _ in range(10_000):
        lr_min = float(rng.uniform(1e-5, 1e-2))
        lr_max = lr_min + float(rng.uniform(0.0, 1.0))
        period = int(rng.integers(2, 2000))
        cycles = int(rng.integers(1, 4))
        spec = CosineCycleSpec(lr_max=lr_max, lr_min=lr_min, cycle_len_iters=period, num_cycles=cycles)
        cases.append((spec, int(rng.integers(0, period * cycles))))

    start = time.perf_counter()
    for spec, it in cases:
        period = spec.cycle_len_iters
        t = it % period
        expected = spec.lr_min + 0.5 * (spec.lr_max - spec.lr_min) * (1 + math.cos(math.pi * t / (period - 1)))
        got = cyclical_cosine_lr(spec, it)
        assert abs(got - expected) <= 1e-12 * abs(expected), (spec, it)
        assert got == cyclical_cosine_lr(spec, t)
    assert time.perf_counter() - start < 1.0


def test_lr_at_step_uses_epoch_boundaries():
    spec = StepScheduleSpec(base_lr=1.0, decay_epochs=(2,), decay_factor=0.5, total_epochs=3, iters_per_epoch=4)
    assert [lr_at(spec, i) for i in range(12)] == [1.0] * 4 + [0.5] * 8
    with pytest.raises(ScheduleRangeError):
        lr_at(spec, 12)


def test_emit_schedule_and_csv(tmp_path):
    spec = CosineCycleSpec(lr_max=0.02, lr_min=0.0002, cycle_len_iters=1000, num_cycles=12)
    records = emit_schedule(spec, spec.total_iters)
    assert len(records) == 12_000
    path = tmp_path / "lr.csv"
    assert write_schedule_csv(records, path) == 12_000
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["iter", "lr"]
    assert len(rows) == 12_001
    assert float(rows[1][1]) == 0.02
    assert float(rows[1000][1]) == 0.0002
    assert float(rows[1001][1]) == 0.02
    assert [float(r[1]) for r in rows[1:]] == [r.lr for r in records]


def test_emit_schedule_rejects_empty():
    with pytest.raises(ScheduleRangeError):
        emit_schedule(one_x_schedule(), 0)
