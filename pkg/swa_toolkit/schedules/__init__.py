"""Learning-rate schedules: step (1x / 2x / fixed) and cyclical cosine annealing."""

from swa_toolkit.schedules.models import CosineCycleSpec, ScheduleRecord, ScheduleSpec, StepScheduleSpec
from swa_toolkit.schedules.policies import (
    cyclical_cosine_lr,
    emit_schedule,
    format_lr,
    lr_at,
    one_x_schedule,
    step_ending_lr,
    step_lr,
    two_x_schedule,
    write_schedule_csv,
)

__all__ = [
    "CosineCycleSpec",
    "ScheduleRecord",
    "ScheduleSpec",
    "StepScheduleSpec",
    "cyclical_cosine_lr",
    "emit_schedule",
    "format_lr",
    "lr_at",
    "one_x_schedule",
    "step_ending_lr",
    "step_lr",
    "two_x_schedule",
    "write_schedule_csv",
]
