"""Average a window of checkpoint files into one SWA checkpoint."""

import logging
from pathlib import Path

from swa_toolkit.averaging.models import AveragingWindow, SkipPolicy, skip_nothing
from swa_toolkit.averaging.running import RunningAverage
from swa_toolkit.errors import IncompatibleCheckpointsError
from swa_toolkit.tensor_store import DType, read_checkpoint, write_checkpoint

logger = logging.getLogger(__name__)


def average_window(
    window: AveragingWindow,
    out_path: Path | str,
    skip_policy: SkipPolicy = skip_nothing,
    out_dtype: DType | None = None,
) -> Path:
    """Stream the window's checkpoints through a running average and write it.

    At most one input checkpoint and the accumulator are held in memory.

    Returns:
        The output path.

    Raises:
        OSError, CheckpointFormatError: When an input cannot be read.
        IncompatibleCheckpointsError: When an input does not match the
            first one; the message names the offending file.
    """
    out_path = Path(out_path)
    acc: RunningAverage | None = None
    for path in window.paths:
        ckpt = read_checkpoint(path)
        if acc is None:
            acc = RunningAverage.start(ckpt, skip_policy)
            continue
        try:
            acc.update(ckpt)
        except IncompatibleCheckpointsError as e:
            raise IncompatibleCheckpointsError(f"{path}: {e}") from e

    assert acc is not None  # a window always holds at least one path
    result = acc.finalize(out_dtype, window=window.label)
    write_checkpoint(result, out_path)
    carried = f", carried {sorted(acc.skipped_names)}" if acc.skipped_names else ""
    logger.info(f"Averaged window {window.label} ({acc.count} checkpoints{carried}) into {out_path}")
    return out_path
