"""Seeded toy datasets and deterministic batching."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.errors import DatasetError
from swa_toolkit.seeding import Stream, make_rng
from swa_toolkit.trainer.models import DatasetKind, DatasetSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``(n, d)`` in float64 with integer class labels ``(n,)``."""

    features: NDArray[np.float64]
    labels: NDArray[np.int64]

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DatasetError(
                f"features {self.features.shape} and labels {self.labels.shape} do not describe the same samples"
            )

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def take(self, indices: NDArray[np.int64]) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices])


def gaussian_blobs(
    n: int,
    input_dim: int,
    n_classes: int,
    noise_sigma: float,
    center_spread: float,
    rng: np.random.Generator,
) -> Dataset:
    """Balanced isotropic Gaussian clusters around random centres."""
    centers = rng.normal(0.0, center_spread, size=(n_classes, input_dim))
    labels = rng.permutation(np.arange(n, dtype=np.int64) % n_classes)
    features = centers[labels] + noise_sigma * rng.normal(size=(n, input_dim))
    return Dataset(features.astype(np.float64), labels)


def two_rings(n: int, noise_sigma: float, rng: np.random.Generator) -> Dataset:
    """Two concentric rings of radius 1 (class 0) and 2 (class 1) in the plane."""
    labels = rng.permutation(np.arange(n, dtype=np.int64) % 2)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radii = 1.0 + labels.astype(np.float64)
    ring = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    features = ring + noise_sigma * rng.normal(size=(n, 2))
    return Dataset(features, labels)


def load_csv(path: Path, input_dim: int, n_classes: int) -> Dataset:
    """Read ``input_dim`` feature columns followed by an integer label column.

    A non-numeric first line is treated as a header.
    """
    try:
        with open(path) as f:
            first = f.readline()
        try:
            [float(cell) for cell in first.strip().split(",")]
            skip = 0
        except ValueError:
            skip = 1
        table = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, dtype=np.float64)
    except OSError as e:
        raise DatasetError(f"Cannot read dataset {path}: {e}") from e
    except ValueError as e:
        raise DatasetError(f"{path}: {e}") from e

    if table.shape[1] != input_dim + 1:
        raise DatasetError(f"{path}: expected {input_dim + 1} columns, found {table.shape[1]}")
    raw_labels = table[:, -1]
    labels = raw_labels.astype(np.int64)
    if np.any(labels != raw_labels) or np.any(labels < 0) or np.any(labels >= n_classes):
        raise DatasetError(f"{path}: labels must be integers in [0, {n_classes})")
    return Dataset(np.ascontiguousarray(table[:, :-1]), labels)


def load_datasets(spec: DatasetSpec, input_dim: int, n_classes: int) -> tuple[Dataset, Dataset]:
    """Build the disjoint train and validation splits described by ``spec``."""
    rng = make_rng(spec.seed, Stream.DATA)
    total = spec.n_train + spec.n_val

    if spec.generator == DatasetKind.GAUSSIAN_BLOBS:
        full = gaussian_blobs(total, input_dim, n_classes, spec.noise_sigma, spec.center_spread, rng)
    elif spec.generator == DatasetKind.TWO_RINGS:
        if input_dim != 2 or n_classes != 2:
            raise DatasetError("two_rings needs input_dim = 2 and 2 classes")
        full = two_rings(total, spec.noise_sigma, rng)
    elif spec.generator == DatasetKind.CSV_FILE:
        assert spec.csv_path is not None
        table = load_csv(spec.csv_path, input_dim, n_classes)
        if len(table) < total:
            raise DatasetError(f"{spec.csv_path}: {len(table)} rows, need n_train + n_val = {total}")
        full = table.take(rng.permutation(len(table))[:total])
    else:
        raise DatasetError(f"Unknown dataset generator: {spec.generator}")

    train = full.take(np.arange(spec.n_train))
    val = full.take(np.arange(spec.n_train, total))
    logger.debug(f"Dataset {spec.generator.value}: {len(train)} train / {len(val)} val samples")
    return train, val


def epoch_order(n: int, seed: int, epoch: int) -> NDArray[np.int64]:
    """Sample order for one epoch, a pure function of ``(seed, epoch)``."""
    return make_rng(seed, Stream.SHUFFLE, epoch).permutation(n)
