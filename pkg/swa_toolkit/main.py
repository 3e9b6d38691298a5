"""swa - command-line entry point for the SWA toolkit.

Subcommands:
    train          Run pretrain + cyclical SWA phase, writing per-epoch checkpoints.
    run-protocol   Train, average SWA windows and report; ``--seeds N`` for many seeds.
    average        Average a window of checkpoint files into one.
    schedule       Emit a learning-rate schedule as ``iter,lr`` CSV.
    probe          Interpolation or perturbation-sharpness loss scan.
    recompute-bn   Recompute batch-norm running statistics of a checkpoint.
    eval           Validation loss and accuracy of a checkpoint.

Exit codes: 0 success, 1 usage error, 2 data or numeric error. Every output
file is written to a temporary sibling and renamed on success.
"""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from swa_toolkit.averaging import AveragingWindow, average_window, glob_skip_policy, skip_nothing
from swa_toolkit.errors import SwaToolkitError
from swa_toolkit.fileio import atomic_path
from swa_toolkit.landscape import interpolate_loss, perturbation_sharpness, write_probe
from swa_toolkit.schedules import (
    CosineCycleSpec,
    StepScheduleSpec,
    emit_schedule,
    one_x_schedule,
    two_x_schedule,
    write_schedule_csv,
)
from swa_toolkit.tensor_store import DType, read_checkpoint, write_checkpoint
from swa_toolkit.trainer import (
    Dataset,
    ModelLoss,
    Parameters,
    TrainConfig,
    evaluate,
    load_train_config,
    prepare_datasets,
    recompute_bn_statistics,
    run_protocol,
    run_protocol_seeds,
    train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class UsageError(Exception):
    """Flags that parse but do not make sense together."""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# =============================================================================
# Helpers
# =============================================================================


def _load_config(args: argparse.Namespace) -> TrainConfig:
    config = load_train_config(args.config)
    if getattr(args, "checkpoint_dir", None) is not None:
        config = config.model_copy(update={"checkpoint_dir": args.checkpoint_dir})
    return config


def _split(config: TrainConfig, name: str) -> Dataset:
    train_set, val_set = prepare_datasets(config)
    return train_set if name == "train" else val_set


# =============================================================================
# Subcommands
# =============================================================================


def cmd_train(args: argparse.Namespace) -> str:
    artifacts = train(_load_config(args))
    last = artifacts.metrics[-1]
    return (
        f"trained {len(artifacts.metrics)} epochs, {len(artifacts.swa_checkpoints)} SWA checkpoints in "
        f"{artifacts.checkpoint_dir} (final val_loss={last.val_loss:.6g} val_acc={last.val_acc:.6g})"
    )


def cmd_run_protocol(args: argparse.Namespace) -> str:
    config = _load_config(args)
    if args.seeds == 1 and args.out_dir is None:
        report = run_protocol(config)
        return (
            f"seed {report.seed}: {report.final_label} val_loss={report.final.val_loss:.6g} "
            f"val_acc={report.final.val_acc:.6g}; {report.swa_label} val_loss={report.swa.val_loss:.6g} "
            f"val_acc={report.swa.val_acc:.6g}"
        )
    summaries = run_protocol_seeds(config, args.seeds, args.out_dir, args.workers)
    better_loss = sum(1 for s in summaries if s.delta_val_loss <= 0)
    root = args.out_dir or config.checkpoint_dir
    return f"{len(summaries)} seeds: SWA val_loss <= final in {better_loss}; aggregate in {root}"


def cmd_average(args: argparse.Namespace) -> str:
    window = AveragingWindow.over(args.inputs, start=args.start)
    policy = glob_skip_policy(args.skip) if args.skip else skip_nothing
    out_dtype = DType.parse(args.out_dtype.upper()) if args.out_dtype else None
    path = average_window(window, args.output, policy, out_dtype)
    return f"averaged {len(window.paths)} checkpoints (window {window.label}) into {path}"


def _schedule_spec(args: argparse.Namespace) -> StepScheduleSpec | CosineCycleSpec:
    if args.kind == "cosine":
        missing = [flag for flag, value in (("--lr-max", args.lr_max), ("--lr-min", args.lr_min)) if value is None]
        if missing:
            raise UsageError(f"--kind cosine requires {', '.join(missing)}")
        return CosineCycleSpec(
            lr_max=args.lr_max, lr_min=args.lr_min, cycle_len_iters=args.cycle_iters, num_cycles=args.cycles
        )
    if args.kind == "1x":
        return one_x_schedule(args.base_lr, args.iters_per_epoch)
    if args.kind == "2x":
        return two_x_schedule(args.base_lr, args.iters_per_epoch)
    if args.epochs is None:
        raise UsageError("--kind step requires --epochs")
    return StepScheduleSpec(
        base_lr=args.base_lr,
        decay_epochs=tuple(args.decay_epochs),
        decay_factor=args.decay_factor,
        total_epochs=args.epochs,
        iters_per_epoch=args.iters_per_epoch,
    )


def cmd_schedule(args: argparse.Namespace) -> str:
    spec = _schedule_spec(args)
    rows = write_schedule_csv(emit_schedule(spec, spec.total_iters), args.out)
    return f"wrote {rows} {args.kind} schedule rows to {args.out}"


def cmd_probe(args: argparse.Namespace) -> str:
    config = _load_config(args)
    loss_fn = ModelLoss(config.model, _split(config, args.split))
    if args.kind == "interpolation":
        if args.source is None or args.target is None:
            raise UsageError("--kind interpolation requires --from and --to")
        alphas = args.alphas if args.alphas else np.linspace(0.0, 1.0, args.points).tolist()
        result = interpolate_loss(read_checkpoint(args.source), read_checkpoint(args.target), alphas, loss_fn)
    else:
        if args.checkpoint is None:
            raise UsageError("--kind sharpness requires --checkpoint")
        result = perturbation_sharpness(
            read_checkpoint(args.checkpoint), args.radius, args.directions, loss_fn, seed=args.seed
        )
    json_path = write_probe(result, args.out)
    return (
        f"{args.kind} probe: mean_loss_increase={result.summary.mean_loss_increase:.6g}; "
        f"wrote {args.out} and {json_path}"
    )


def cmd_recompute_bn(args: argparse.Namespace) -> str:
    config = _load_config(args)
    ckpt = read_checkpoint(args.checkpoint)
    params = recompute_bn_statistics(Parameters.from_checkpoint(config.model, ckpt), _split(config, args.split))
    write_checkpoint(params.to_checkpoint(ckpt.metadata).with_metadata(bn="recomputed"), args.output)
    return f"recomputed batch-norm statistics over the {args.split} split into {args.output}"


def cmd_eval(args: argparse.Namespace) -> str:
    config = _load_config(args)
    ckpt = read_checkpoint(args.checkpoint)
    result = evaluate(Parameters.from_checkpoint(config.model, ckpt), _split(config, args.split))
    if args.out is not None:
        with atomic_path(args.out) as tmp:
            tmp.write_text(result.model_dump_json(indent=2) + "\n")
    return f"{args.split} loss={result.loss:.17g} accuracy={result.accuracy:.17g}"


# =============================================================================
# Parser
# =============================================================================


def build_parser() -> CliParser:
    parser = CliParser(prog="swa", description="Stochastic weight averaging toolkit.")
    common = CliParser(add_help=False)
    common.add_argument("--log-level", choices=LOG_LEVELS, default="INFO", help="Logging level (stderr).")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, handler: Callable[[argparse.Namespace], str], help_text: str) -> CliParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("train", cmd_train, "Pretrain, then run the cyclical SWA phase.")
    p.add_argument("--config", type=Path, required=True, help="Flat TOML training config.")
    p.add_argument("--checkpoint-dir", type=Path, help="Override checkpoint_dir from the config.")

    p = add("run-protocol", cmd_run_protocol, "Train, average SWA windows and write a report.")
    p.add_argument("--config", type=Path, required=True, help="Flat TOML training config.")
    p.add_argument("--checkpoint-dir", type=Path, help="Override checkpoint_dir from the config.")
    p.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds to run.")
    p.add_argument("--workers", type=int, default=1, help="Parallel worker processes for --seeds.")
    p.add_argument("--out-dir", type=Path, help="Root directory for per-seed runs and aggregate.csv.")

    p = add("average", cmd_average, "Average checkpoints of consecutive epochs.")
    p.add_argument("--inputs", type=Path, nargs="+", required=True, help="Checkpoints in epoch order.")
    p.add_argument("--output", type=Path, required=True, help="Averaged checkpoint path.")
    p.add_argument("--start", type=int, default=1, help="Epoch number of the first input.")
    p.add_argument("--skip", action="append", default=[], help="Glob of tensor names carried, not averaged.")
    p.add_argument("--out-dtype", choices=("f32", "f64"), help="dtype of averaged tensors.")

    p = add("schedule", cmd_schedule, "Write a learning-rate schedule as iter,lr CSV.")
    p.add_argument("--kind", choices=("cosine", "step", "1x", "2x"), required=True)
    p.add_argument("--lr-max", type=float, help="Cosine: learning rate at each cycle start.")
    p.add_argument("--lr-min", type=float, help="Cosine: learning rate at each cycle end.")
    p.add_argument("--cycle-iters", type=int, default=1, help="Cosine: iterations per cycle.")
    p.add_argument("--cycles", type=int, default=1, help="Cosine: number of cycles.")
    p.add_argument("--base-lr", type=float, default=0.02, help="Step: initial learning rate.")
    p.add_argument("--decay-epochs", type=int, nargs="*", default=[], help="Step: epochs that decay the rate.")
    p.add_argument("--decay-factor", type=float, default=0.1, help="Step: multiplicative decay.")
    p.add_argument("--epochs", type=int, help="Step: total epochs.")
    p.add_argument("--iters-per-epoch", type=int, default=1, help="Step: iterations per epoch.")
    p.add_argument("--out", type=Path, required=True, help="Output CSV.")

    p = add("probe", cmd_probe, "Loss along an interpolation path or under random perturbations.")
    p.add_argument("--config", type=Path, required=True, help="Config naming the model and dataset.")
    p.add_argument("--kind", choices=("interpolation", "sharpness"), required=True)
    p.add_argument("--from", dest="source", type=Path, help="Interpolation start checkpoint.")
    p.add_argument("--to", dest="target", type=Path, help="Interpolation end checkpoint.")
    p.add_argument("--alphas", type=float, nargs="+", help="Interpolation coordinates in [0, 1].")
    p.add_argument("--points", type=int, default=11, help="Evenly spaced alphas when --alphas is absent.")
    p.add_argument("--checkpoint", type=Path, help="Sharpness centre checkpoint.")
    p.add_argument("--radius", type=float, default=0.5, help="Sharpness L2 radius.")
    p.add_argument("--directions", type=int, default=32, help="Sharpness direction count.")
    p.add_argument("--seed", type=int, default=0, help="Sharpness direction seed.")
    p.add_argument("--split", choices=("val", "train"), default="val")
    p.add_argument("--out", type=Path, required=True, help="coord,loss CSV; a .json summary goes beside it.")

    p = add("recompute-bn", cmd_recompute_bn, "Recompute batch-norm running statistics.")
    p.add_argument("--config", type=Path, required=True, help="Config naming the model and dataset.")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val"), default="train")

    p = add("eval", cmd_eval, "Evaluate a checkpoint.")
    p.add_argument("--config", type=Path, required=True, help="Config naming the model and dataset.")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=("val", "train"), default="val")
    p.add_argument("--out", type=Path, help="Optional JSON with loss and accuracy.")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, dispatch to a subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        summary = args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"swa {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SwaToolkitError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_DATA
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
