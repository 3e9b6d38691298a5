"""Pydantic models for the desk-scale training protocol."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from swa_toolkit.averaging.models import DEFAULT_SKIP_PATTERNS
from swa_toolkit.schedules.models import CosineCycleSpec, StepScheduleSpec
from swa_toolkit.tensor_store.models import Checkpoint, DType


class DatasetKind(str, Enum):
    """Available dataset generators."""

    GAUSSIAN_BLOBS = "gaussian_blobs"
    TWO_RINGS = "two_rings"
    CSV_FILE = "csv_file"


class Phase(str, Enum):
    """Training phases of the protocol."""

    PRETRAIN = "pretrain"
    SWA = "swa"


class ModelSpec(BaseModel):
    """A rectifier MLP, optionally with batch-norm on hidden pre-activations.

    An empty ``hidden_dims`` is a single linear layer.
    """

    model_config = ConfigDict(frozen=True)

    input_dim: int = Field(..., gt=0)
    hidden_dims: tuple[int, ...] = ()
    output_dim: int = Field(..., gt=0)
    use_batchnorm: bool = False
    bn_eps: float = Field(default=1e-12, ge=0)
    bn_momentum: float = Field(default=0.1, gt=0, le=1)

    @model_validator(mode="after")
    def _check_layers(self) -> "ModelSpec":
        if any(d <= 0 for d in self.hidden_dims):
            raise ValueError(f"hidden_dims must be positive, got {list(self.hidden_dims)}")
        if self.use_batchnorm and not self.hidden_dims:
            raise ValueError("use_batchnorm needs at least one hidden layer")
        return self

    @property
    def activation(self) -> str:
        return "relu"

    @property
    def dtype(self) -> DType:
        return DType.F64

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every linear layer, output layer last."""
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims, dims[1:]))


class DatasetSpec(BaseModel):
    """Where the train / validation samples come from.

    Both splits are drawn together from one seeded source and then split,
    so they are disjoint and reproducible.
    """

    model_config = ConfigDict(frozen=True)

    generator: DatasetKind = DatasetKind.GAUSSIAN_BLOBS
    n_train: int = Field(..., gt=0)
    n_val: int = Field(..., gt=0)
    noise_sigma: float = Field(default=1.0, ge=0)
    seed: int = Field(default=0, ge=0)
    center_spread: float = Field(default=1.0, gt=0)
    csv_path: Path | None = None

    @model_validator(mode="after")
    def _check_source(self) -> "DatasetSpec":
        if self.generator == DatasetKind.CSV_FILE and self.csv_path is None:
            raise ValueError("csv_file datasets need csv_path")
        return self


class OptimizerConfig(BaseModel):
    """SGD constants. Conventional defaults, not tuned values."""

    model_config = ConfigDict(frozen=True)

    momentum: float = Field(default=0.9, ge=0)
    weight_decay: float = Field(default=1e-4, ge=0)


class SharpnessConfig(BaseModel):
    """Random-perturbation sharpness probe run on every reported model."""

    model_config = ConfigDict(frozen=True)

    enabled: bool = False
    radius: float = Field(default=0.5, ge=0)
    directions: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0)


class TrainConfig(BaseModel):
    """Everything needed to reproduce one protocol run bit for bit."""

    model_config = ConfigDict(frozen=True)

    model: ModelSpec
    dataset: DatasetSpec
    seed: int = Field(default=0, ge=0)
    batch_size: int = Field(default=32, gt=0)
    optimizer: OptimizerConfig = OptimizerConfig()
    pretrain_schedule: StepScheduleSpec
    swa_cycles: CosineCycleSpec
    swa_epochs: int = Field(..., gt=0)
    checkpoint_dir: Path = Path("checkpoints")
    save_pretrain_checkpoints: bool = False
    swa_windows: tuple[int, ...] = ()
    recompute_bn: bool = False
    skip_patterns: tuple[str, ...] = DEFAULT_SKIP_PATTERNS
    sharpness: SharpnessConfig = SharpnessConfig()

    @model_validator(mode="after")
    def _check_wiring(self) -> "TrainConfig":
        ipe = self.iters_per_epoch
        if ipe < 1:
            raise ValueError(f"n_train ({self.dataset.n_train}) is smaller than batch_size ({self.batch_size})")
        if self.model.use_batchnorm and self.batch_size < 2:
            raise ValueError("batch-norm training needs batch_size >= 2")
        if self.pretrain_schedule.iters_per_epoch != ipe:
            raise ValueError(f"pretrain_schedule.iters_per_epoch must be {ipe}")
        if self.swa_cycles.cycle_len_iters != ipe:
            raise ValueError(f"swa_cycles.cycle_len_iters must equal one epoch ({ipe} iterations)")
        if self.swa_cycles.num_cycles != self.swa_epochs:
            raise ValueError(f"swa_cycles.num_cycles must equal swa_epochs ({self.swa_epochs})")
        if any(w < 1 for w in self.swa_windows):
            raise ValueError(f"swa_windows must be positive, got {list(self.swa_windows)}")
        if self.dataset.generator == DatasetKind.TWO_RINGS and (
            self.model.input_dim != 2 or self.model.output_dim != 2
        ):
            raise ValueError("two_rings needs input_dim = 2 and output_dim = 2")
        return self

    @property
    def iters_per_epoch(self) -> int:
        return self.dataset.n_train // self.batch_size

    @property
    def pretrain_epochs(self) -> int:
        return self.pretrain_schedule.total_epochs


class EpochMetrics(BaseModel):
    """One row of the metrics table."""

    epoch: int
    phase: Phase
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float


class EvalResult(BaseModel):
    """Mean cross-entropy and argmax accuracy over a dataset."""

    loss: float
    accuracy: float


@dataclass
class RunArtifacts:
    """What one training run leaves behind.

    Attributes:
        checkpoint_dir: Directory holding checkpoints and ``metrics.csv``.
        swa_checkpoints: One path per SWA-phase epoch, in order.
        pretrain_checkpoints: One path per pretrain epoch when requested.
        metrics: One row per epoch, pretrain first.
        metrics_path: The metrics CSV.
        pretrained: Weights at the end of the pretrain phase.
    """

    checkpoint_dir: Path
    swa_checkpoints: list[Path]
    metrics: list[EpochMetrics]
    metrics_path: Path
    pretrained: Checkpoint
    pretrain_checkpoints: list[Path] = field(default_factory=list)


class RowKind(str, Enum):
    """Kinds of models compared in a protocol report."""

    PRETRAINED = "pretrained"
    EPOCH = "epoch"
    BEST = "best"
    SWA = "swa"
    SWA_BN = "swa_bn"


class ReportRow(BaseModel):
    """Validation results for one model."""

    label: str
    kind: RowKind
    val_loss: float
    val_acc: float
    sharpness: float | None = None


class ProtocolReport(BaseModel):
    """Per-epoch and SWA results of one seed.

    ``final_label`` names the last SWA-phase epoch, ``best_label`` the epoch
    behind the ``best`` row and ``swa_label`` the largest averaging window
    (its BN-recomputed variant when enabled).
    """

    seed: int
    rows: list[ReportRow]
    final_label: str
    swa_label: str
    best_label: str | None = None

    def row(self, label: str) -> ReportRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def epoch_rows(self) -> list[ReportRow]:
        return [row for row in self.rows if row.kind == RowKind.EPOCH]

    @property
    def final(self) -> ReportRow:
        return self.row(self.final_label)

    @property
    def swa(self) -> ReportRow:
        return self.row(self.swa_label)


class SeedSummary(BaseModel):
    """SWA versus final-epoch comparison for one seed."""

    seed: int
    final_val_loss: float
    final_val_acc: float
    swa_val_loss: float
    swa_val_acc: float
    delta_val_loss: float
    delta_val_acc: float
    swa_sharpness: float | None = None
    mean_epoch_sharpness: float | None = None
