"""Flat TOML configuration for training runs.

A config file holds flat ``key = value`` pairs only::

    seed = 0
    batch_size = 32
    momentum = 0.9                 # SGD momentum
    weight_decay = 1e-4            # L2 penalty added to every gradient

    input_dim = 8
    hidden_dims = [32, 32]
    output_dim = 4
    use_batchnorm = false
    bn_eps = 1e-12
    bn_momentum = 0.1              # running-statistics EMA factor

    dataset = "gaussian_blobs"     # gaussian_blobs | two_rings | csv_file
    n_train = 2000
    n_val = 1000
    noise_sigma = 1.2
    data_seed = 0
    center_spread = 1.0            # std of blob centres
    csv_path = "data.csv"          # csv_file only: feature columns then label

    pretrain_lr = 0.02
    pretrain_epochs = 16
    decay_epochs = []              # [9, 12] is the 1x recipe
    decay_factor = 0.1

    swa_epochs = 12
    swa_lr_max = 0.02              # default: pretrain_lr
    swa_lr_min = 0.0002            # default: lr of the last pretrain epoch
    swa_windows = [6, 12]          # default: [6, swa_epochs]

    save_pretrain_checkpoints = false
    recompute_bn = false
    skip = ["*.num_batches"]       # tensors carried, not averaged

    probe_sharpness = false
    sharpness_radius = 0.5
    sharpness_directions = 32
    sharpness_seed = 0

    checkpoint_dir = "checkpoints"

Unknown keys are rejected. Relative paths are resolved against the
directory of the config file.
"""

import logging
import tomllib
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError

from swa_toolkit.averaging.models import DEFAULT_SKIP_PATTERNS
from swa_toolkit.errors import ConfigError
from swa_toolkit.schedules import CosineCycleSpec, StepScheduleSpec, step_ending_lr
from swa_toolkit.trainer.models import (
    DatasetKind,
    DatasetSpec,
    ModelSpec,
    OptimizerConfig,
    SharpnessConfig,
    TrainConfig,
)

logger = logging.getLogger(__name__)


class FlatTrainConfig(BaseModel):
    """The flat key/value form of :class:`TrainConfig`."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    batch_size: int = 32
    momentum: float = 0.9
    weight_decay: float = 1e-4

    input_dim: int
    hidden_dims: list[int] = []
    output_dim: int
    use_batchnorm: bool = False
    bn_eps: float = 1e-12
    bn_momentum: float = 0.1

    dataset: DatasetKind = DatasetKind.GAUSSIAN_BLOBS
    n_train: int
    n_val: int
    noise_sigma: float = 1.0
    data_seed: int = 0
    center_spread: float = 1.0
    csv_path: Path | None = None

    pretrain_lr: float = 0.02
    pretrain_epochs: int = 12
    decay_epochs: list[int] = []
    decay_factor: float = 0.1

    swa_epochs: int = 12
    swa_lr_max: float | None = None
    swa_lr_min: float | None = None
    swa_windows: list[int] = []

    save_pretrain_checkpoints: bool = False
    recompute_bn: bool = False
    skip: list[str] = list(DEFAULT_SKIP_PATTERNS)

    probe_sharpness: bool = False
    sharpness_radius: float = 0.5
    sharpness_directions: int = 32
    sharpness_seed: int = 0

    checkpoint_dir: Path = Path("checkpoints")

    def to_train_config(self) -> TrainConfig:
        """Derive the nested config, wiring schedules to the epoch length."""
        ipe = self.n_train // self.batch_size if self.batch_size > 0 else 0
        ipe = max(ipe, 1)
        pretrain = StepScheduleSpec(
            base_lr=self.pretrain_lr,
            decay_epochs=tuple(self.decay_epochs),
            decay_factor=self.decay_factor,
            total_epochs=self.pretrain_epochs,
            iters_per_epoch=ipe,
        )
        lr_max = self.swa_lr_max if self.swa_lr_max is not None else pretrain.base_lr
        lr_min = self.swa_lr_min if self.swa_lr_min is not None else step_ending_lr(pretrain)
        cycles = CosineCycleSpec(lr_max=lr_max, lr_min=lr_min, cycle_len_iters=ipe, num_cycles=self.swa_epochs)
        return TrainConfig(
            model=ModelSpec(
                input_dim=self.input_dim,
                hidden_dims=tuple(self.hidden_dims),
                output_dim=self.output_dim,
                use_batchnorm=self.use_batchnorm,
                bn_eps=self.bn_eps,
                bn_momentum=self.bn_momentum,
            ),
            dataset=DatasetSpec(
                generator=self.dataset,
                n_train=self.n_train,
                n_val=self.n_val,
                noise_sigma=self.noise_sigma,
                seed=self.data_seed,
                center_spread=self.center_spread,
                csv_path=self.csv_path,
            ),
            seed=self.seed,
            batch_size=self.batch_size,
            optimizer=OptimizerConfig(momentum=self.momentum, weight_decay=self.weight_decay),
            pretrain_schedule=pretrain,
            swa_cycles=cycles,
            swa_epochs=self.swa_epochs,
            checkpoint_dir=self.checkpoint_dir,
            save_pretrain_checkpoints=self.save_pretrain_checkpoints,
            swa_windows=tuple(self.swa_windows),
            recompute_bn=self.recompute_bn,
            skip_patterns=tuple(self.skip),
            sharpness=SharpnessConfig(
                enabled=self.probe_sharpness,
                radius=self.sharpness_radius,
                directions=self.sharpness_directions,
                seed=self.sharpness_seed,
            ),
        )


def parse_train_config(values: dict[str, object], base_dir: Path | None = None) -> TrainConfig:
    """Validate flat key/values and build a :class:`TrainConfig`.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    try:
        flat = FlatTrainConfig.model_validate(values)
        if base_dir is not None:
            updates: dict[str, Path] = {}
            if flat.csv_path is not None and not flat.csv_path.is_absolute():
                updates["csv_path"] = base_dir / flat.csv_path
            if not flat.checkpoint_dir.is_absolute():
                updates["checkpoint_dir"] = base_dir / flat.checkpoint_dir
            flat = flat.model_copy(update=updates)
        return flat.to_train_config()
    except ValidationError as e:
        raise ConfigError(f"Invalid training config: {e}") from e


def load_train_config(path: Path | str) -> TrainConfig:
    """Read a flat TOML config file.

    Raises:
        ConfigError: If the file is unreadable, not TOML, nested, or invalid.
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            values = tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e

    nested = sorted(key for key, value in values.items() if isinstance(value, dict))
    if nested:
        raise ConfigError(f"{path}: config must be flat; found tables {nested}")
    config = parse_train_config(values, base_dir=path.parent)
    logger.info(f"Loaded training config from {path}")
    return config
