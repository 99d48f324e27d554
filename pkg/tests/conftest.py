"""Shared pytest fixtures for meshgnn tests."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from meshgnn.config import FeatureConfig, ModelConfig, TrainConfig
from meshgnn.graph import Sample, assemble_sample
from meshgnn.models import TrainingInfo
from meshgnn.nn.checkpoint import Checkpoint
from meshgnn.nn.model import init_parameters
from meshgnn.pipeline.synthetic import MANIFEST_NAME, SyntheticConfig, gen_synthetic
from tests.fixtures.meshes import bumpy_sphere, tetrahedron

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.config import ConvKind, FeatureMode
    from meshgnn.nn.model import ModelParameters


@pytest.fixture
def rng() -> np.random.Generator:
    """Fresh seeded generator per test."""
    return np.random.default_rng(1234)


# ---------------------------------------------------------------------------
# Shared test helpers
# ---------------------------------------------------------------------------


def make_sample(
    rng: np.random.Generator,
    *,
    n_structures: int = 2,
    label: int = 0,
    mode: FeatureMode = "positional",
    sample_id: str = "s0",
    spheres: bool = False,
) -> Sample:
    """Sample of jittered tetrahedra (or bumpy spheres) with real features."""
    meshes = []
    for _ in range(n_structures):
        if spheres:
            meshes.append(bumpy_sphere(rng, subdivisions=0, radius=4.0))
        else:
            base = tetrahedron(2.0)
            noise = rng.uniform(-0.3, 0.3, size=base.vertices.shape)
            meshes.append(base.with_vertices(base.vertices + noise))
    config = FeatureConfig(mode=mode, radius=6.0, max_neighbors=20, bins=3)
    return assemble_sample(
        meshes,
        label,
        {"age": 40.0, "sex": "F", "group": "CN"},
        mode,
        n_structures=n_structures,
        sample_id=sample_id,
        config=config,
    )


def tiny_model_config(
    conv: ConvKind = "graphconv",
    *,
    input_dim: int = 3,
    n_structures: int = 2,
    hidden: int = 4,
) -> ModelConfig:
    """Small model for gradient and batching checks."""
    return ModelConfig(
        conv_kind=conv,
        hidden=hidden,
        n_structures=n_structures,
        input_dim=input_dim,
        fc_hidden=5,
        spline_kernel_size=3,
    )


def tiny_params(config: ModelConfig, seed: int = 7) -> ModelParameters:
    """Random parameters with non-zero biases."""
    rng = np.random.default_rng(seed)
    params = init_parameters(config, rng)
    for name in params:
        if name.endswith(".bias"):
            params[name] = rng.uniform(-0.2, 0.2, size=params[name].shape)
    return params


def make_checkpoint() -> Checkpoint:
    """Spline checkpoint over positional features with two structures."""
    config = tiny_model_config("spline")
    return Checkpoint(
        model_config=config,
        feature_config=FeatureConfig(mode="positional"),
        training=TrainingInfo(
            seed=3, aug_offset=0.5, max_epochs=10, best_epoch=4, val_auc=0.875
        ),
        params=tiny_params(config),
    )


def tiny_train_config(
    *,
    conv: ConvKind = "graphconv",
    mode: FeatureMode = "positional",
    n_structures: int = 2,
    max_epochs: int = 3,
    aug_offset: float = 0.0,
    seed: int = 0,
) -> TrainConfig:
    """Training config sized for a few dozen tiny samples."""
    features = FeatureConfig(mode=mode, radius=6.0, max_neighbors=20, bins=3)
    model = ModelConfig(
        conv_kind=conv,
        hidden=8,
        n_structures=n_structures,
        input_dim=features.input_dim,
        fc_hidden=8,
        spline_kernel_size=3,
    )
    return TrainConfig(
        seed=seed,
        batch_size=8,
        lr=0.01,
        max_epochs=max_epochs,
        aug_offset=aug_offset,
        features=features,
        model=model,
    )


def write_synthetic(
    out_dir: Path,
    *,
    n_samples: int = 24,
    n_structures: int = 2,
    class_effect: float = 0.3,
    seed: int = 0,
    **overrides: object,
) -> Path:
    """Generate a small synthetic dataset and return its manifest path."""
    config = SyntheticConfig.model_validate(
        {
            "n_samples": n_samples,
            "n_structures": n_structures,
            "class_effect": class_effect,
            "seed": seed,
            "subdivisions": 0,
            **overrides,
        }
    )
    return gen_synthetic(config, out_dir)


@pytest.fixture(scope="session")
def synthetic_manifest(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Aligned two-structure synthetic dataset shared by pipeline tests."""
    out_dir = tmp_path_factory.mktemp("synthetic")
    path = write_synthetic(out_dir, n_samples=40, class_effect=0.6)
    assert path == out_dir / MANIFEST_NAME
    return path
