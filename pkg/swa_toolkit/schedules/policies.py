"""Learning-rate policies: step decay and cyclical cosine annealing."""

import csv
import logging
import math
from collections.abc import Iterable
from pathlib import Path

from swa_toolkit.errors import ScheduleRangeError
from swa_toolkit.fileio import atomic_path
from swa_toolkit.schedules.models import CosineCycleSpec, ScheduleRecord, ScheduleSpec, StepScheduleSpec

logger = logging.getLogger(__name__)

ONE_X_DECAY_EPOCHS = (9, 12)
TWO_X_DECAY_EPOCHS = (17, 23)


def one_x_schedule(base_lr: float = 0.02, iters_per_epoch: int = 1) -> StepScheduleSpec:
    """12 epochs, learning rate divided by 10 at epochs 9 and 12."""
    return StepScheduleSpec(
        base_lr=base_lr,
        decay_epochs=ONE_X_DECAY_EPOCHS,
        decay_factor=0.1,
        total_epochs=12,
        iters_per_epoch=iters_per_epoch,
    )


def two_x_schedule(base_lr: float = 0.02, iters_per_epoch: int = 1) -> StepScheduleSpec:
    """24 epochs, learning rate divided by 10 at epochs 17 and 23."""
    return StepScheduleSpec(
        base_lr=base_lr,
        decay_epochs=TWO_X_DECAY_EPOCHS,
        decay_factor=0.1,
        total_epochs=24,
        iters_per_epoch=iters_per_epoch,
    )


def step_lr(spec: StepScheduleSpec, epoch: int) -> float:
    """Learning rate for a 1-indexed epoch.

    Raises:
        ScheduleRangeError: If ``epoch`` is outside ``[1, total_epochs]``.
    """
    if not 1 <= epoch <= spec.total_epochs:
        raise ScheduleRangeError(f"Epoch {epoch} outside [1, {spec.total_epochs}]")
    decays = sum(1 for e in spec.decay_epochs if e <= epoch)
    return spec.base_lr * spec.decay_factor**decays


def step_ending_lr(spec: StepScheduleSpec) -> float:
    """Learning rate in force during the final epoch."""
    return step_lr(spec, spec.total_epochs)


def cyclical_cosine_lr(spec: CosineCycleSpec, global_iter: int) -> float:
    """Learning rate at a 0-indexed iteration of a cyclical cosine schedule.

    Within each cycle of length T the rate falls from ``lr_max`` at t = 0 to
    exactly ``lr_min`` at t = T - 1, then jumps back.

    Raises:
        ScheduleRangeError: If ``global_iter`` is outside the schedule.
    """
    if not 0 <= global_iter < spec.total_iters:
        raise ScheduleRangeError(f"Iteration {global_iter} outside [0, {spec.total_iters})")
    period = spec.cycle_len_iters
    if period == 1:
        return spec.lr_max
    t = global_iter % period
    if t == 0:
        return spec.lr_max
    if t == period - 1:
        return spec.lr_min
    return spec.lr_min + 0.5 * (spec.lr_max - spec.lr_min) * (1.0 + math.cos(math.pi * t / (period - 1)))


def lr_at(spec: ScheduleSpec, global_iter: int) -> float:
    """Dispatch to the policy matching ``spec``, indexing by global iteration."""
    if isinstance(spec, CosineCycleSpec):
        return cyclical_cosine_lr(spec, global_iter)
    if global_iter < 0:
        raise ScheduleRangeError(f"Iteration {global_iter} is negative")
    return step_lr(spec, global_iter // spec.iters_per_epoch + 1)


def emit_schedule(spec: ScheduleSpec, total_iters: int) -> list[ScheduleRecord]:
    """One ``(iter, lr)`` record per iteration, ``0 .. total_iters - 1``."""
    if total_iters < 1:
        raise ScheduleRangeError(f"total_iters must be at least 1, got {total_iters}")
    return [ScheduleRecord(i, lr_at(spec, i)) for i in range(total_iters)]


def format_lr(lr: float) -> str:
    """17 significant digits, enough to round-trip any float64."""
    return format(lr, ".17g")


def write_schedule_csv(records: Iterable[ScheduleRecord], path: Path | str) -> int:
    """Write records as ``iter,lr`` CSV atomically; returns the row count."""
    rows = 0
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["iter", "lr"])
            for record in records:
                writer.writerow([record.iter, format_lr(record.lr)])
                rows += 1
    logger.info(f"Wrote {rows} schedule rows to {path}")
    return rows
