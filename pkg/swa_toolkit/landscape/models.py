"""Pydantic models for loss-landscape probe results."""

from collections.abc import Callable
from enum import Enum

from pydantic import BaseModel, model_validator

from swa_toolkit.tensor_store.models import Checkpoint

LossFn = Callable[[Checkpoint], float]

# Running statistics and counters are not weights; moving them is not a perturbation.
PROBE_SKIP_PATTERNS = ("*.running_mean", "*.running_var", "*.num_batches")


class ProbeKind(str, Enum):
    """Kinds of loss scans."""

    INTERPOLATION = "interpolation"
    SHARPNESS = "sharpness"


class ProbeSummary(BaseModel):
    """Scalar digest of a scan.

    Attributes:
        loss_at_ends: Mean loss of the two end points of the grid.
        loss_at_mid: Loss at the grid point closest to the middle of the scan.
        mean_loss_increase: Interpolation: mean loss along the path minus
            ``loss_at_ends``. Sharpness: mean loss over every perturbed point
            minus the unperturbed loss.
    """

    loss_at_ends: float
    loss_at_mid: float
    mean_loss_increase: float


class ProbeResult(BaseModel):
    """Losses sampled along one scan.

    For sharpness scans ``grid`` is ``[-radius, 0, radius]`` (``[0]`` for a
    zero radius), the end losses are means over directions and
    ``pair_losses`` keeps the ``(minus, plus)`` loss of every direction.
    """

    kind: ProbeKind
    grid: list[float]
    losses: list[float]
    summary: ProbeSummary
    pair_losses: list[tuple[float, float]] = []

    @model_validator(mode="after")
    def _check_grid(self) -> "ProbeResult":
        if len(self.grid) != len(self.losses):
            raise ValueError(f"grid has {len(self.grid)} points but losses has {len(self.losses)}")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        return self
