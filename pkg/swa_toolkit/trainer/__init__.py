"""Deterministic desk-scale trainer and the SWA protocol driver."""

from swa_toolkit.trainer.config import FlatTrainConfig, load_train_config, parse_train_config
from swa_toolkit.trainer.data import Dataset, epoch_order, load_datasets
from swa_toolkit.trainer.engine import (
    ModelLoss,
    evaluate,
    prepare_datasets,
    recompute_bn_statistics,
    train,
    write_metrics_csv,
)
from swa_toolkit.trainer.models import (
    DatasetKind,
    DatasetSpec,
    EpochMetrics,
    EvalResult,
    ModelSpec,
    OptimizerConfig,
    Phase,
    ProtocolReport,
    ReportRow,
    RowKind,
    RunArtifacts,
    SeedSummary,
    SharpnessConfig,
    TrainConfig,
)
from swa_toolkit.trainer.network import Mode, Parameters, forward, loss_and_grad
from swa_toolkit.trainer.optim import sgd_step
from swa_toolkit.trainer.protocol import resolve_windows, run_protocol, run_protocol_seeds, summarize

__all__ = [
    "Dataset",
    "DatasetKind",
    "DatasetSpec",
    "EpochMetrics",
    "EvalResult",
    "FlatTrainConfig",
    "Mode",
    "ModelLoss",
    "ModelSpec",
    "OptimizerConfig",
    "Parameters",
    "Phase",
    "ProtocolReport",
    "ReportRow",
    "RowKind",
    "RunArtifacts",
    "SeedSummary",
    "SharpnessConfig",
    "TrainConfig",
    "epoch_order",
    "evaluate",
    "forward",
    "load_datasets",
    "load_train_config",
    "loss_and_grad",
    "parse_train_config",
    "prepare_datasets",
    "recompute_bn_statistics",
    "resolve_windows",
    "run_protocol",
    "run_protocol_seeds",
    "sgd_step",
    "summarize",
    "train",
    "write_metrics_csv",
]
