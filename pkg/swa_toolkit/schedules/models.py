"""Pydantic models describing learning-rate policies."""

from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StepScheduleSpec(BaseModel):
    """Piecewise-constant policy with multiplicative decays at named epochs.

    Epochs are 1-indexed; the decayed rate applies from the named epoch on.
    An empty ``decay_epochs`` gives a fixed learning rate.
    """

    model_config = ConfigDict(frozen=True)

    base_lr: float = Field(..., gt=0)
    decay_epochs: tuple[int, ...] = ()
    decay_factor: float = Field(default=0.1, gt=0)
    total_epochs: int = Field(..., gt=0)
    iters_per_epoch: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def _check_decay_epochs(self) -> "StepScheduleSpec":
        epochs = self.decay_epochs
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError(f"decay_epochs must be strictly ascending, got {list(epochs)}")
        if any(not 1 <= e <= self.total_epochs for e in epochs):
            raise ValueError(f"decay_epochs {list(epochs)} must lie within [1, {self.total_epochs}]")
        return self

    @property
    def total_iters(self) -> int:
        return self.total_epochs * self.iters_per_epoch


class CosineCycleSpec(BaseModel):
    """Cyclical cosine annealing from ``lr_max`` down to ``lr_min``.

    ``lr_max == lr_min`` is a constant learning rate.
    """

    model_config = ConfigDict(frozen=True)

    lr_max: float = Field(..., gt=0)
    lr_min: float = Field(..., gt=0)
    cycle_len_iters: int = Field(..., ge=1)
    num_cycles: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "CosineCycleSpec":
        if self.lr_min > self.lr_max:
            raise ValueError(f"lr_min ({self.lr_min}) must not exceed lr_max ({self.lr_max})")
        return self

    @property
    def total_iters(self) -> int:
        return self.cycle_len_iters * self.num_cycles


ScheduleSpec = StepScheduleSpec | CosineCycleSpec


class ScheduleRecord(NamedTuple):
    """Learning rate in force at one global iteration."""

    iter: int
    lr: float
