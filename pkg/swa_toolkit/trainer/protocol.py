"""The full protocol: train, average SWA windows, evaluate, compare seeds."""

import csv
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from swa_toolkit.averaging import AveragingWindow, average_window, glob_skip_policy
from swa_toolkit.fileio import atomic_path
from swa_toolkit.landscape import perturbation_sharpness
from swa_toolkit.schedules import format_lr
from swa_toolkit.tensor_store import Checkpoint, read_checkpoint, write_checkpoint
from swa_toolkit.trainer.data import Dataset
from swa_toolkit.trainer.engine import ModelLoss, evaluate, prepare_datasets, recompute_bn_statistics, train
from swa_toolkit.trainer.models import ProtocolReport, ReportRow, RowKind, SeedSummary, TrainConfig
from swa_toolkit.trainer.network import Parameters

logger = logging.getLogger(__name__)

DEFAULT_SHORT_WINDOW = 6
REPORT_HEADER = ("label", "kind", "val_loss", "val_acc", "sharpness")
AGGREGATE_HEADER = (
    "seed",
    "final_val_loss",
    "final_val_acc",
    "swa_val_loss",
    "swa_val_acc",
    "delta_val_loss",
    "delta_val_acc",
    "swa_sharpness",
    "mean_epoch_sharpness",
)


def resolve_windows(config: TrainConfig) -> list[int]:
    """Window lengths to average, each starting at SWA epoch 1.

    Defaults to ``[6, swa_epochs]``. Windows longer than the SWA phase are
    dropped with a warning; duplicates collapse.
    """
    requested = list(config.swa_windows) or [DEFAULT_SHORT_WINDOW, config.swa_epochs]
    kept: list[int] = []
    for length in requested:
        if length > config.swa_epochs:
            logger.warning(f"Dropping SWA window 1-{length}: the SWA phase has {config.swa_epochs} epochs")
        elif length not in kept:
            kept.append(length)
    if not kept:
        kept.append(config.swa_epochs)
    return sorted(kept)


class _Evaluator:
    """Scores checkpoints on the validation split, with optional sharpness."""

    def __init__(self, config: TrainConfig, val_set: Dataset) -> None:
        self.config = config
        self.val_set = val_set
        self.loss_fn = ModelLoss(config.model, val_set)

    def row(self, label: str, kind: RowKind, ckpt: Checkpoint) -> ReportRow:
        result = evaluate(Parameters.from_checkpoint(self.config.model, ckpt), self.val_set)
        sharpness = None
        probe = self.config.sharpness
        if probe.enabled:
            sharpness = perturbation_sharpness(
                ckpt, probe.radius, probe.directions, self.loss_fn, seed=probe.seed
            ).summary.mean_loss_increase
        return ReportRow(label=label, kind=kind, val_loss=result.loss, val_acc=result.accuracy, sharpness=sharpness)


def _best_epoch(rows: list[ReportRow]) -> ReportRow:
    # Highest accuracy, then lowest loss, then earliest.
    return min(enumerate(rows), key=lambda item: (-item[1].val_acc, item[1].val_loss, item[0]))[1]


def write_report(report: ProtocolReport, out_dir: Path | str) -> tuple[Path, Path]:
    """Write ``report.csv`` and ``report.json`` atomically into ``out_dir``."""
    out_dir = Path(out_dir)
    csv_path, json_path = out_dir / "report.csv", out_dir / "report.json"
    with atomic_path(csv_path) as tmp:
        with open(tmp, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(REPORT_HEADER)
            for row in report.rows:
                sharpness = "" if row.sharpness is None else format_lr(row.sharpness)
                writer.writerow(
                    [row.label, row.kind.value, format_lr(row.val_loss), format_lr(row.val_acc), sharpness]
                )
    with atomic_path(json_path) as tmp:
        tmp.write_text(report.model_dump_json(indent=2) + "\n")
    return csv_path, json_path


def run_protocol(config: TrainConfig) -> ProtocolReport:
    """Train, average the SWA windows and compare every model on validation.

    Rows: the pretrained model, every SWA-phase epoch, the best of those
    epochs, and each averaging window ``swa_1-<n>``. With batch-norm and
    ``recompute_bn`` each window also gets a ``swa_1-<n>_bn`` row whose
    running statistics were recomputed over the training split. The report
    is written to ``report.csv`` and ``report.json`` in the checkpoint dir.
    """
    artifacts = train(config)
    train_set, val_set = prepare_datasets(config)
    ckpt_dir = artifacts.checkpoint_dir
    evaluator = _Evaluator(config, val_set)
    skip_policy = glob_skip_policy(config.skip_patterns)

    rows = [evaluator.row("pretrained", RowKind.PRETRAINED, artifacts.pretrained)]
    epoch_rows = [
        evaluator.row(f"epoch_{i}", RowKind.EPOCH, read_checkpoint(path))
        for i, path in enumerate(artifacts.swa_checkpoints, start=1)
    ]
    rows += epoch_rows
    best = _best_epoch(epoch_rows)
    rows.append(best.model_copy(update={"label": "best", "kind": RowKind.BEST}))

    swa_label = ""
    for length in resolve_windows(config):
        window = AveragingWindow.over(artifacts.swa_checkpoints[:length])
        label = f"swa_{window.label}"
        path = average_window(window, ckpt_dir / f"{label}.ckpt", skip_policy)
        averaged = read_checkpoint(path)
        rows.append(evaluator.row(label, RowKind.SWA, averaged))
        swa_label = label
        if config.model.use_batchnorm and config.recompute_bn:
            params = recompute_bn_statistics(Parameters.from_checkpoint(config.model, averaged), train_set)
            recomputed = params.to_checkpoint(averaged.metadata).with_metadata(bn="recomputed")
            write_checkpoint(recomputed, ckpt_dir / f"{label}_bn.ckpt")
            swa_label = f"{label}_bn"
            rows.append(evaluator.row(swa_label, RowKind.SWA_BN, recomputed))

    report = ProtocolReport(
        seed=config.seed,
        rows=rows,
        final_label=epoch_rows[-1].label,
        swa_label=swa_label,
        best_label=best.label,
    )
    write_report(report, ckpt_dir)
    logger.info(
        f"Seed {config.seed}: final val_loss={report.final.val_loss:.4f} acc={report.final.val_acc:.4f}, "
        f"{swa_label} val_loss={report.swa.val_loss:.4f} acc={report.swa.val_acc:.4f}"
    )
    return report


def summarize(report: ProtocolReport) -> SeedSummary:
    """SWA-versus-final-epoch deltas of one report."""
    final, swa = report.final, report.swa
    epoch_sharpness = [row.sharpness for row in report.epoch_rows() if row.sharpness is not None]
    return SeedSummary(
        seed=report.seed,
        final_val_loss=final.val_loss,
        final_val_acc=final.val_acc,
        swa_val_loss=swa.val_loss,
        swa_val_acc=swa.val_acc,
        delta_val_loss=swa.val_loss - final.val_loss,
        delta_val_acc=swa.val_acc - final.val_acc,
        swa_sharpness=swa.sharpness,
        mean_epoch_sharpness=statistics.fmean(epoch_sharpness) if epoch_sharpness else None,
    )


def _cell(value: float | None) -> str:
    return "" if value is None else format_lr(value)


def write_aggregate_csv(summaries: list[SeedSummary], path: Path | str) -> Path:
    """Per-seed rows followed by a ``median`` row over all seeds."""
    path = Path(path)
    fields = AGGREGATE_HEADER[1:]
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(AGGREGATE_HEADER)
            for summary in summaries:
                writer.writerow([summary.seed, *(_cell(getattr(summary, name)) for name in fields)])
            medians = []
            for name in fields:
                values = [getattr(s, name) for s in summaries if getattr(s, name) is not None]
                medians.append(_cell(statistics.median(values)) if values else "")
            writer.writerow(["median", *medians])
    return path


def run_protocol_seeds(
    config: TrainConfig,
    n_seeds: int,
    out_dir: Path | str | None = None,
    workers: int = 1,
) -> list[SeedSummary]:
    """Run the protocol for seeds ``config.seed .. config.seed + n_seeds - 1``.

    Each seed trains in its own ``seed_<s>`` directory under ``out_dir``
    (default: the config's checkpoint dir) with no shared state, so seeds may
    run in parallel worker processes. ``aggregate.csv`` collects the
    per-seed deltas and their medians.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be at least 1, got {n_seeds}")
    root = Path(out_dir) if out_dir is not None else Path(config.checkpoint_dir)
    root.mkdir(parents=True, exist_ok=True)
    configs = [
        config.model_copy(update={"seed": seed, "checkpoint_dir": root / f"seed_{seed}"})
        for seed in range(config.seed, config.seed + n_seeds)
    ]
    logger.info(f"Running the protocol for {n_seeds} seeds with {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_protocol, configs))
    else:
        reports = [run_protocol(c) for c in configs]

    summaries = [summarize(report) for report in reports]
    write_aggregate_csv(summaries, root / "aggregate.csv")
    logger.info(f"Wrote aggregate of {n_seeds} seeds to {root / 'aggregate.csv'}")
    return summaries
