"""Training loop, evaluation and batch-norm statistics recomputation."""

import csv
import logging
from pathlib import Path

import numpy as np

from swa_toolkit.errors import DatasetError, SwaToolkitError, TrainingError
from swa_toolkit.fileio import atomic_path
from swa_toolkit.schedules import ScheduleSpec, format_lr, lr_at
from swa_toolkit.tensor_store import Checkpoint, write_checkpoint
from swa_toolkit.trainer.data import Dataset, epoch_order, load_datasets
from swa_toolkit.trainer.models import (
    EpochMetrics,
    EvalResult,
    ModelSpec,
    Phase,
    RunArtifacts,
    TrainConfig,
)
from swa_toolkit.trainer.network import (
    BatchStats,
    Mode,
    Parameters,
    bn_name,
    cross_entropy,
    forward,
    hidden_preactivations,
    loss_grad_and_stats,
)
from swa_toolkit.trainer.optim import sgd_step

logger = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "phase", "train_loss", "val_loss", "val_acc", "lr")
STATS_CHUNK = 4096


def prepare_datasets(config: TrainConfig) -> tuple[Dataset, Dataset]:
    """Train and validation splits for ``config``'s model."""
    return load_datasets(config.dataset, config.model.input_dim, config.model.output_dim)


def evaluate(params: Parameters, dataset: Dataset) -> EvalResult:
    """Eval-mode loss and accuracy over the whole dataset.

    Argmax ties go to the lower class index.

    Raises:
        DatasetError: If the dataset is empty.
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot evaluate on an empty dataset")
    logits, _ = forward(params, dataset.features, Mode.EVAL)
    loss, _ = cross_entropy(logits, dataset.labels)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
    return EvalResult(loss=loss, accuracy=accuracy)


def recompute_bn_statistics(params: Parameters, dataset: Dataset) -> Parameters:
    """Replace every BN layer's running statistics with exact dataset statistics.

    Layers are processed in order. Layer k's pre-activations are computed in
    eval mode with the already recomputed statistics of the layers before it,
    and reduced through shifted sums and sums of squares in float64. The
    variance is the biased (population) one. Every other tensor is unchanged.

    Returns:
        A new :class:`Parameters`; ``params`` is not modified.

    Raises:
        ValueError: If the model has no batch-norm.
        DatasetError: If the dataset has fewer than 2 samples.
    """
    if not params.spec.use_batchnorm:
        raise ValueError("Model has no batch-norm layers to recompute")
    n = len(dataset)
    if n < 2:
        raise DatasetError(f"Batch-norm statistics need at least 2 samples, got {n}")

    result = params.copy()
    for layer in result.bn_layers:
        shift = hidden_preactivations(result, dataset.features[:1], layer)[0]
        total = np.zeros_like(shift)
        total_sq = np.zeros_like(shift)
        for start in range(0, n, STATS_CHUNK):
            z = hidden_preactivations(result, dataset.features[start : start + STATS_CHUNK], layer) - shift
            total += z.sum(axis=0)
            total_sq += (z * z).sum(axis=0)
        centered_mean = total / n
        result.tensors[bn_name(layer, "running_mean")] = shift + centered_mean
        result.tensors[bn_name(layer, "running_var")] = np.maximum(total_sq / n - centered_mean**2, 0.0)
        logger.debug(f"Recomputed statistics of BN layer {layer} over {n} samples")
    return result


class ModelLoss:
    """Validation loss of a checkpoint under a fixed architecture and dataset.

    Turns checkpoints into scalars for the landscape probes.
    """

    def __init__(self, spec: ModelSpec, dataset: Dataset) -> None:
        self.spec = spec
        self.dataset = dataset

    def __call__(self, ckpt: Checkpoint) -> float:
        return evaluate(Parameters.from_checkpoint(self.spec, ckpt), self.dataset).loss


def _update_running_stats(params: Parameters, stats: dict[int, BatchStats]) -> None:
    momentum = params.spec.bn_momentum
    for layer, batch in stats.items():
        mean = params.tensors[bn_name(layer, "running_mean")]
        var = params.tensors[bn_name(layer, "running_var")]
        mean += momentum * (batch.mean - mean)
        var += momentum * (batch.var - var)
        params.tensors[bn_name(layer, "num_batches")] += 1.0


def _run_epoch(
    params: Parameters,
    train_set: Dataset,
    config: TrainConfig,
    schedule: ScheduleSpec,
    phase: Phase,
    epoch: int,
    global_epoch: int,
) -> tuple[float, float]:
    """One pass over the shuffled training set; returns (mean train loss, starting lr)."""
    ipe = config.iters_per_epoch
    batch_size = config.batch_size
    order = epoch_order(len(train_set), config.seed, global_epoch)
    first_iter = (epoch - 1) * ipe
    losses = np.empty(ipe)
    start_lr = lr_at(schedule, first_iter)
    for i in range(ipe):
        try:
            idx = order[i * batch_size : (i + 1) * batch_size]
            loss, grads, stats = loss_grad_and_stats(params, train_set.features[idx], train_set.labels[idx])
            _update_running_stats(params, stats)
            sgd_step(
                params,
                grads,
                lr_at(schedule, first_iter + i),
                config.optimizer.momentum,
                config.optimizer.weight_decay,
            )
        except (SwaToolkitError, ValueError, FloatingPointError) as e:
            raise TrainingError(str(e), phase.value, epoch, i) from e
        losses[i] = loss
    return float(losses.mean()), start_lr


def write_metrics_csv(metrics: list[EpochMetrics], path: Path | str) -> Path:
    """Write the per-epoch metrics table atomically."""
    path = Path(path)
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for row in metrics:
                writer.writerow(
                    [
                        row.epoch,
                        row.phase.value,
                        format_lr(row.train_loss),
                        format_lr(row.val_loss),
                        format_lr(row.val_acc),
                        format_lr(row.lr),
                    ]
                )
    return path


def train(config: TrainConfig) -> RunArtifacts:
    """Pretrain under the step schedule, then run the cyclical SWA phase.

    Writes ``swa_epoch_NNN.ckpt`` at the end of every SWA-phase epoch (and
    ``pretrain_epoch_NNN.ckpt`` when requested) plus ``metrics.csv`` into
    ``config.checkpoint_dir``. Momentum buffers carry over between phases.
    The run is bit-reproducible for a fixed config.

    Raises:
        TrainingError: When an iteration, a validation pass or a file write
            fails; the message carries the phase, the epoch and, for
            iterations, the iteration index.
    """
    ckpt_dir = Path(config.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    train_set, val_set = prepare_datasets(config)
    params = Parameters.initialize(config.model, config.seed)
    logger.info(
        f"Training {config.pretrain_epochs} pretrain + {config.swa_epochs} SWA epochs, "
        f"{config.iters_per_epoch} iterations each, seed {config.seed}"
    )

    metrics: list[EpochMetrics] = []
    swa_paths: list[Path] = []
    pretrain_paths: list[Path] = []
    pretrained: Checkpoint | None = None
    phases: list[tuple[Phase, int, ScheduleSpec]] = [
        (Phase.PRETRAIN, config.pretrain_epochs, config.pretrain_schedule),
        (Phase.SWA, config.swa_epochs, config.swa_cycles),
    ]

    global_epoch = 0
    for phase, n_epochs, schedule in phases:
        for epoch in range(1, n_epochs + 1):
            global_epoch += 1
            train_loss, lr = _run_epoch(params, train_set, config, schedule, phase, epoch, global_epoch)
            try:
                result = evaluate(params, val_set)
            except (SwaToolkitError, ValueError, FloatingPointError) as e:
                raise TrainingError(f"validation failed: {e}", phase.value, epoch) from e
            metrics.append(
                EpochMetrics(
                    epoch=epoch,
                    phase=phase,
                    train_loss=train_loss,
                    val_loss=result.loss,
                    val_acc=result.accuracy,
                    lr=lr,
                )
            )
            logger.info(
                f"{phase.value} epoch {epoch}/{n_epochs}: train_loss={train_loss:.4f} "
                f"val_loss={result.loss:.4f} val_acc={result.accuracy:.4f} lr={lr:.6g}"
            )

            ckpt = params.to_checkpoint({"epoch": str(epoch), "phase": phase.value, "seed": str(config.seed)})
            if phase == Phase.SWA:
                swa_paths.append(_save(ckpt, ckpt_dir / f"swa_epoch_{epoch:03d}.ckpt", phase, epoch))
            elif config.save_pretrain_checkpoints:
                pretrain_paths.append(_save(ckpt, ckpt_dir / f"pretrain_epoch_{epoch:03d}.ckpt", phase, epoch))
            if phase == Phase.PRETRAIN and epoch == n_epochs:
                pretrained = ckpt

    assert pretrained is not None
    try:
        metrics_path = write_metrics_csv(metrics, ckpt_dir / "metrics.csv")
    except OSError as e:
        raise TrainingError(str(e), Phase.SWA.value, config.swa_epochs) from e
    logger.info(f"Wrote {len(swa_paths)} SWA checkpoints and metrics to {ckpt_dir}")
    return RunArtifacts(
        checkpoint_dir=ckpt_dir,
        swa_checkpoints=swa_paths,
        metrics=metrics,
        metrics_path=metrics_path,
        pretrained=pretrained,
        pretrain_checkpoints=pretrain_paths,
    )


def _save(ckpt: Checkpoint, path: Path, phase: Phase, epoch: int) -> Path:
    try:
        write_checkpoint(ckpt, path)
    except OSError as e:
        raise TrainingError(str(e), phase.value, epoch) from e
    return path
