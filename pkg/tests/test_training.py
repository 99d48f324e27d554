"""Tests for the training loop and grid experiments."""

from __future__ import annotations

import time
import warnings
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest
from loguru import logger

from meshgnn.config import FeatureConfig, ModelConfig, TrainConfig
from meshgnn.exceptions import ConfigMismatchError, SplitError
from meshgnn.features import FeatureCache
from meshgnn.nn.checkpoint import load_checkpoint
from meshgnn.nn.model import init_parameters
from meshgnn.pipeline.evaluation import evaluate
from meshgnn.pipeline.experiment import (
    GridPoint,
    config_for,
    grid_points,
    run_experiment,
)
from meshgnn.pipeline.manifest import load_manifest
from meshgnn.pipeline.training import EPOCH_LOG_COLUMNS, train
from tests.conftest import tiny_train_config, write_synthetic

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.config import ConvKind


def test_short_run_writes_artifacts(synthetic_manifest: Path, tmp_path: Path) -> None:
    manifest = load_manifest(synthetic_manifest)

    result = train(tiny_train_config(max_epochs=3), manifest, tmp_path / "run")

    assert [r.epoch for r in result.epochs] == [1, 2, 3]
    assert all(np.isfinite(r.train_loss) for r in result.epochs)
    assert 1 <= result.best_epoch <= 3
    log = pd.read_csv(result.epoch_log_path)
    assert tuple(log.columns) == EPOCH_LOG_COLUMNS
    for name in ("train", "val", "test"):
        assert (tmp_path / "run" / f"{name}.csv").is_file()
    checkpoint = load_checkpoint(result.checkpoint_path)
    assert checkpoint.training.best_epoch == result.best_epoch
    assert checkpoint.training.n_train == 28
    assert len(result.test_manifest) == 8


def test_zero_epochs_saves_initial_parameters(
    synthetic_manifest: Path, tmp_path: Path
) -> None:
    config = tiny_train_config(max_epochs=0, seed=11)

    result = train(config, load_manifest(synthetic_manifest), tmp_path)

    checkpoint = load_checkpoint(result.checkpoint_path)
    initial = init_parameters(config.model, np.random.default_rng(11))
    assert result.best_epoch == 0
    assert result.epochs == []
    for name, value in initial.items():
        np.testing.assert_array_equal(checkpoint.params[name], value)


def test_identical_runs_write_identical_logs(
    synthetic_manifest: Path, tmp_path: Path
) -> None:
    manifest = load_manifest(synthetic_manifest)
    config = tiny_train_config(conv="spline", max_epochs=2, aug_offset=0.5)

    a = train(config, manifest, tmp_path / "a", threads=2)
    b = train(config, manifest, tmp_path / "b", threads=1)

    assert a.epoch_log_path.read_bytes() == b.epoch_log_path.read_bytes()
    assert a.checkpoint_path.read_bytes() == b.checkpoint_path.read_bytes()


def test_feature_cache_is_filled(synthetic_manifest: Path, tmp_path: Path) -> None:
    cache = FeatureCache(tmp_path / "cache")
    config = tiny_train_config(mode="fpfh", max_epochs=1)

    train(config, load_manifest(synthetic_manifest), tmp_path / "run", cache=cache)

    # train + val samples, two structures each
    assert len(list((tmp_path / "cache").glob("*.npz"))) == 2 * (28 + 4)


def test_empty_validation_split_rejected(tmp_path: Path) -> None:
    path = write_synthetic(tmp_path, n_samples=4)

    with pytest.raises(SplitError, match="empty val split"):
        train(tiny_train_config(), load_manifest(path), tmp_path / "run")


def test_structure_count_must_match(synthetic_manifest: Path, tmp_path: Path) -> None:
    config = tiny_train_config(n_structures=3)
    with pytest.raises(ConfigMismatchError, match="n_structures"):
        train(config, load_manifest(synthetic_manifest), tmp_path)


@pytest.mark.slow
def test_separable_dataset_is_learned(tmp_path: Path) -> None:
    path = write_synthetic(
        tmp_path / "data", n_samples=120, class_effect=1.0, subdivisions=1
    )
    features = FeatureConfig(mode="fpfh", bins=5)
    config = TrainConfig(
        seed=0,
        batch_size=16,
        lr=0.01,
        max_epochs=40,
        features=features,
        model=ModelConfig(
            conv_kind="graphconv",
            hidden=16,
            n_structures=2,
            input_dim=features.input_dim,
            fc_hidden=16,
        ),
    )

    result = train(config, load_manifest(path), tmp_path / "run")

    assert result.val_auc is not None
    assert result.val_auc > 0.9


def _reference_config(
    conv: ConvKind, max_epochs: int, aug_offset: float = 0.0
) -> TrainConfig:
    """Default FPFH features and model widths over four structures."""
    features = FeatureConfig(mode="fpfh")
    return TrainConfig(
        seed=0,
        batch_size=32,
        lr=0.005,
        max_epochs=max_epochs,
        aug_offset=aug_offset,
        features=features,
        model=ModelConfig(
            conv_kind=conv, n_structures=4, input_dim=features.input_dim
        ),
    )


@pytest.mark.slow
def test_spline_fpfh_reaches_target_auc(tmp_path: Path) -> None:
    """600 aligned samples, 70/10/20 split, aug 0.1: test AUC ≥ 0.90 in 10 min."""
    start = time.perf_counter()
    path = write_synthetic(
        tmp_path / "data", n_samples=600, n_structures=4, subdivisions=2
    )
    config = _reference_config("spline", max_epochs=50, aug_offset=0.1)
    cache = FeatureCache(tmp_path / "cache")

    result = train(
        config, load_manifest(path), tmp_path / "run", cache=cache, threads=4
    )
    metrics, _ = evaluate(
        load_checkpoint(result.checkpoint_path),
        result.test_manifest,
        cache=cache,
        threads=4,
    )

    assert metrics.auc is not None
    assert metrics.auc >= 0.90
    assert time.perf_counter() - start < 600


@pytest.mark.slow
def test_fpfh_beats_positional_out_of_distribution(tmp_path: Path) -> None:
    """Random poses in training, +100 mm shifted test set."""
    path = write_synthetic(
        tmp_path / "data", n_samples=600, n_structures=4, subdivisions=2,
        pose_mode="random",
    )  # fmt: skip
    shifted = write_synthetic(
        tmp_path / "shifted", n_samples=200, n_structures=4, subdivisions=2,
        pose_mode="random", domain_shift="translate", seed=1,
    )  # fmt: skip
    points = [
        GridPoint("graphconv", "fpfh", 0.0),
        GridPoint("graphconv", "fpfh", 0.1),
        GridPoint("graphconv", "positional", 0.0),
    ]

    result = run_experiment(
        _reference_config("graphconv", max_epochs=30),
        load_manifest(path),
        points,
        {"shifted": load_manifest(shifted)},
        tmp_path / "grid",
        cache=FeatureCache(tmp_path / "cache"),
        threads=4,
    )

    auc = result.summary.set_index(["run", "test_set"])["auc"]
    fpfh_auc = auc[("graphconv-fpfh-aug0", "shifted")]
    assert fpfh_auc - auc[("graphconv-positional-aug0", "shifted")] >= 0.15
    aug_gain = auc[("graphconv-fpfh-aug0.1", "shifted")] - fpfh_auc
    logger.info(f"Сдвиг AUC от аугментации 0.1 на shifted: {aug_gain:+.4f}")
    if aug_gain < -0.02:
        warnings.warn(
            f"augmentation lowered shifted-domain AUC by {-aug_gain:.4f}",
            stacklevel=1,
        )


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------


def test_grid_order() -> None:
    points = grid_points(["gcn", "spline"], ["fpfh"], [0.0, 0.5])

    assert [p.name for p in points] == [
        "gcn-fpfh-aug0",
        "gcn-fpfh-aug0.5",
        "spline-fpfh-aug0",
        "spline-fpfh-aug0.5",
    ]


def test_config_for_rewires_input_dim() -> None:
    base = tiny_train_config(mode="positional")

    config = config_for(base, GridPoint("gcn", "fpfh", 1.0))

    assert config.model.conv_kind == "gcn"
    assert config.features.mode == "fpfh"
    assert config.model.input_dim == 3 * base.features.bins
    assert config.aug_offset == 1.0
    assert config.seed == base.seed


def test_experiment_evaluates_every_test_set(
    synthetic_manifest: Path, tmp_path: Path
) -> None:
    shifted = load_manifest(
        write_synthetic(tmp_path / "shifted", n_samples=8, domain_shift="translate")
    )
    points = grid_points(["gcn"], ["constant", "positional"], [0.0])

    result = run_experiment(
        tiny_train_config(max_epochs=1),
        load_manifest(synthetic_manifest),
        points,
        {"shifted": shifted},
        tmp_path / "grid",
    )

    assert result.summary["run"].tolist() == [
        "gcn-constant-aug0",
        "gcn-constant-aug0",
        "gcn-positional-aug0",
        "gcn-positional-aug0",
    ]
    assert result.summary["test_set"].tolist() == ["test", "shifted"] * 2
    assert result.summary_path.is_file()
    assert set(result.roc["test_set"]) == {"test", "shifted"}
