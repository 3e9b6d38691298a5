"""Shared fixtures: tiny configs that train in well under a second."""

from pathlib import Path

import pytest

from swa_toolkit.trainer import TrainConfig, parse_train_config


def tiny_values(checkpoint_dir: Path, **overrides: object) -> dict[str, object]:
    values: dict[str, object] = {
        "seed": 3,
        "batch_size": 16,
        "input_dim": 4,
        "hidden_dims": [8],
        "output_dim": 3,
        "dataset": "gaussian_blobs",
        "n_train": 96,
        "n_val": 48,
        "noise_sigma": 0.8,
        "pretrain_lr": 0.05,
        "pretrain_epochs": 2,
        "swa_epochs": 3,
        "swa_lr_min": 0.005,
        "checkpoint_dir": str(checkpoint_dir),
    }
    values.update(overrides)
    return values


@pytest.fixture
def make_config(tmp_path: Path):
    """Factory for small, fast training configs rooted in ``tmp_path``."""

    def factory(subdir: str = "run", **overrides: object) -> TrainConfig:
        return parse_train_config(tiny_values(tmp_path / subdir, **overrides))

    return factory


@pytest.fixture
def config_values(tmp_path: Path):
    """Factory for the flat key/values behind :func:`make_config`."""

    def factory(**overrides: object) -> dict[str, object]:
        return tiny_values(tmp_path / "run", **overrides)

    return factory
