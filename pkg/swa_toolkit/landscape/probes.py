"""Interpolation and random-perturbation loss scans over checkpoints."""

import csv
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.averaging.models import DEFAULT_SKIP_PATTERNS, SkipPolicy, glob_skip_policy
from swa_toolkit.fileio import atomic_path
from swa_toolkit.landscape.models import (
    PROBE_SKIP_PATTERNS,
    LossFn,
    ProbeKind,
    ProbeResult,
    ProbeSummary,
)
from swa_toolkit.schedules import format_lr
from swa_toolkit.seeding import Stream, make_rng
from swa_toolkit.tensor_store import Checkpoint, NamedTensor, check_compatible

logger = logging.getLogger(__name__)


def _blend(w_a: Checkpoint, w_b: Checkpoint, alpha: float, skip_policy: SkipPolicy) -> Checkpoint:
    if alpha == 0.0:
        return w_a
    if alpha == 1.0:
        return w_b
    tensors: dict[str, NamedTensor] = {}
    for tensor in w_a:
        if skip_policy(tensor.name):
            tensors[tensor.name] = tensor
            continue
        a = tensor.data.astype(np.float64)
        b = w_b[tensor.name].data.astype(np.float64)
        mixed = (1.0 - alpha) * a + alpha * b
        tensors[tensor.name] = NamedTensor(tensor.name, mixed.astype(tensor.dtype.numpy_dtype))
    return Checkpoint(tensors=tensors, metadata=w_a.metadata)


def interpolate_loss(
    w_a: Checkpoint,
    w_b: Checkpoint,
    alphas: Sequence[float],
    loss_fn: LossFn,
    skip_policy: SkipPolicy | None = None,
) -> ProbeResult:
    """Loss along the segment ``(1 - alpha) * w_a + alpha * w_b``.

    Skipped tensors are taken from ``w_a``. The end points ``alpha = 0`` and
    ``alpha = 1`` evaluate ``w_a`` and ``w_b`` themselves.

    Args:
        w_a: Start of the segment.
        w_b: End of the segment; must be compatible with ``w_a``.
        alphas: Strictly increasing coordinates in ``[0, 1]``.
        loss_fn: Maps a checkpoint to a scalar loss.
        skip_policy: Tensors not interpolated; defaults to batch counters.

    Raises:
        IncompatibleCheckpointsError: If the checkpoints differ in layout.
        ValueError: If ``alphas`` is empty, unsorted or out of range.
    """
    check_compatible(w_a, w_b)
    grid = [float(a) for a in alphas]
    if not grid:
        raise ValueError("alphas must not be empty")
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise ValueError(f"alphas must lie within [0, 1], got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alphas must be strictly increasing")
    policy = skip_policy or glob_skip_policy(DEFAULT_SKIP_PATTERNS)

    losses = [float(loss_fn(_blend(w_a, w_b, alpha, policy))) for alpha in grid]
    ends = 0.5 * (losses[0] + losses[-1])
    mid = losses[int(np.argmin([abs(a - 0.5) for a in grid]))]
    summary = ProbeSummary(
        loss_at_ends=ends,
        loss_at_mid=mid,
        mean_loss_increase=float(np.mean([loss - ends for loss in losses])),
    )
    logger.debug(f"Interpolated {len(grid)} points: ends={ends:.6g} mid={mid:.6g}")
    return ProbeResult(kind=ProbeKind.INTERPOLATION, grid=grid, losses=losses, summary=summary)


def _shift(w: Checkpoint, names: list[str], direction: NDArray[np.float64], scale: float) -> Checkpoint:
    tensors = dict(w.tensors)
    offset = 0
    for name in names:
        tensor = w[name]
        step = direction[offset : offset + tensor.size].reshape(tensor.shape)
        offset += tensor.size
        moved = tensor.data.astype(np.float64) + scale * step
        tensors[name] = NamedTensor(name, moved.astype(tensor.dtype.numpy_dtype))
    return Checkpoint(tensors=tensors, metadata=w.metadata)


def perturbation_sharpness(
    w: Checkpoint,
    radius: float,
    n_dirs: int,
    loss_fn: LossFn,
    seed: int = 0,
    skip_policy: SkipPolicy | None = None,
) -> ProbeResult:
    """Mean loss increase at ``w +- radius * d`` over random unit directions.

    Directions are standard-normal draws over the concatenation of every
    perturbed tensor, scaled to unit global L2 norm. Both signs of every
    direction are evaluated and kept in ``pair_losses``.

    Args:
        w: Centre checkpoint.
        radius: Non-negative global L2 step length.
        n_dirs: Number of directions, at least 1.
        loss_fn: Maps a checkpoint to a scalar loss.
        seed: Seed of the direction stream.
        skip_policy: Tensors left in place; defaults to BN running
            statistics and counters.

    Raises:
        ValueError: If ``radius`` is negative, ``n_dirs`` is below 1, or no
            tensor is left to perturb.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if n_dirs < 1:
        raise ValueError(f"n_dirs must be at least 1, got {n_dirs}")
    policy = skip_policy or glob_skip_policy(PROBE_SKIP_PATTERNS)
    names = [name for name in w.names() if not policy(name)]
    dim = sum(w[name].size for name in names)
    if dim == 0:
        raise ValueError("No tensor elements to perturb")

    base = float(loss_fn(w))
    rng = make_rng(seed, Stream.PROBE)
    pairs: list[tuple[float, float]] = []
    for _ in range(n_dirs):
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        minus = float(loss_fn(_shift(w, names, direction, -radius)))
        plus = float(loss_fn(_shift(w, names, direction, radius)))
        pairs.append((minus, plus))

    mean_minus = float(np.mean([p[0] for p in pairs]))
    mean_plus = float(np.mean([p[1] for p in pairs]))
    increase = float(np.mean([[minus - base, plus - base] for minus, plus in pairs]))
    if radius > 0:
        grid, losses = [-radius, 0.0, radius], [mean_minus, base, mean_plus]
    else:
        grid, losses = [0.0], [base]
    summary = ProbeSummary(
        loss_at_ends=0.5 * (mean_minus + mean_plus),
        loss_at_mid=base,
        mean_loss_increase=increase,
    )
    logger.debug(f"Sharpness at radius {radius} over {n_dirs} directions: {increase:.6g}")
    return ProbeResult(kind=ProbeKind.SHARPNESS, grid=grid, losses=losses, summary=summary, pair_losses=pairs)


def write_probe(result: ProbeResult, path: Path | str) -> Path:
    """Write ``coord,loss`` CSV at ``path`` and the full result as JSON beside it.

    Returns:
        The JSON summary path (``path`` with a ``.json`` suffix).
    """
    path = Path(path)
    json_path = path.with_suffix(".json")
    with atomic_path(path) as tmp_csv, atomic_path(json_path) as tmp_json:
        with open(tmp_csv, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["coord", "loss"])
            for coord, loss in zip(result.grid, result.losses):
                writer.writerow([format_lr(coord), format_lr(loss)])
        tmp_json.write_text(result.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {result.kind.value} probe ({len(result.grid)} points) to {path}")
    return json_path
