"""Configuration loading with priority: CLI flag > env > bundled preset."""

from __future__ import annotations

import importlib.resources
import math
import os
from typing import Literal

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from meshgnn.exceptions import MeshGnnError

ConvKind = Literal["gcn", "graphconv", "spline"]
FeatureMode = Literal["constant", "positional", "fpfh"]

CONV_KINDS: tuple[ConvKind, ...] = ("gcn", "graphconv", "spline")
FEATURE_MODES: tuple[FeatureMode, ...] = ("constant", "positional", "fpfh")

THREADS_ENV = "MESHGNN_THREADS"


class FeatureConfig(BaseModel):
    """Node-feature extraction settings."""

    model_config = ConfigDict(frozen=True)

    mode: FeatureMode = "fpfh"
    radius: float = Field(default=10.0, gt=0)
    max_neighbors: int = Field(default=100, ge=1)
    bins: int = Field(default=11, ge=1)
    normalize_spfh: bool = True

    @property
    def input_dim(self) -> int:
        """Width of the node feature matrix produced by this mode."""
        if self.mode == "constant":
            return 1
        if self.mode == "positional":
            return 3
        return 3 * self.bins


class ModelConfig(BaseModel):
    """Shared-submodel architecture.

    ``spline_kernel_size`` and ``spline_degree`` are ignored unless
    ``conv_kind == "spline"``.
    """

    model_config = ConfigDict(frozen=True)

    conv_kind: ConvKind = "spline"
    hidden: int = Field(default=32, ge=1)
    conv_layers: Literal[3] = 3
    n_structures: int = Field(default=15, ge=1)
    n_classes: int = Field(default=2, ge=2)
    input_dim: int = Field(ge=1)
    fc_hidden: int = Field(default=32, ge=1)
    spline_kernel_size: int = Field(default=5, ge=2)
    spline_degree: Literal[1] = 1


class TrainConfig(BaseModel):
    """Everything a training run needs besides the data."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0)
    batch_size: int = Field(default=128, ge=1)
    lr: float = Field(default=0.001, gt=0)
    max_epochs: int = Field(default=50, ge=0)
    aug_offset: float = Field(default=0.0, ge=0)
    split_fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    features: FeatureConfig = FeatureConfig()
    model: ModelConfig

    @field_validator("split_fractions")
    @classmethod
    def _fractions_sum_to_one(
        cls, value: tuple[float, float, float]
    ) -> tuple[float, float, float]:
        if any(f < 0 for f in value) or not math.isclose(sum(value), 1.0):
            msg = f"split fractions must be non-negative and sum to 1, got {value}"
            raise ValueError(msg)
        return value


class TrainingDefaults(BaseModel):
    """Training section of the preset (model/features live in their own sections)."""

    seed: int = Field(default=0, ge=0)
    batch_size: int = 128
    lr: float = 0.001
    max_epochs: int = 50
    aug_offset: float = 0.0
    split_fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)


class ModelDefaults(BaseModel):
    """Model section of the preset; ``input_dim`` is derived from features."""

    conv_kind: ConvKind = "spline"
    hidden: int = 32
    fc_hidden: int = 32
    n_structures: int = 15
    n_classes: int = 2
    spline_kernel_size: int = 5
    spline_degree: Literal[1] = 1


class RuntimeConfig(BaseModel):
    """Execution settings that never change results."""

    threads: int = Field(default=1, ge=1)


class Preset(BaseModel):
    """Bundled default hyperparameters."""

    features: FeatureConfig = FeatureConfig()
    model: ModelDefaults = ModelDefaults()
    training: TrainingDefaults = TrainingDefaults()
    runtime: RuntimeConfig = RuntimeConfig()

    def build_model_config(self, **overrides: object) -> ModelConfig:
        """Return a ``ModelConfig`` from preset values, *overrides* winning."""
        data: dict[str, object] = self.model.model_dump()
        data["input_dim"] = self.features.input_dim
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ModelConfig.model_validate(data)


def load_preset() -> Preset:
    """Load the bundled preset YAML."""
    ref = importlib.resources.files("meshgnn.presets").joinpath("default.yaml")
    data = yaml.safe_load(ref.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        logger.warning("Invalid preset format; expected mapping. Using defaults.")
        return Preset()
    return Preset.model_validate(data)


def resolve_threads(flag_value: int | None, preset: Preset | None = None) -> int:
    """Return the worker count: flag, then ``MESHGNN_THREADS``, then preset."""
    if flag_value is not None:
        threads = flag_value
    elif raw := os.environ.get(THREADS_ENV, "").strip():
        try:
            threads = int(raw)
        except ValueError as e:
            raise MeshGnnError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    else:
        threads = (preset or load_preset()).runtime.threads
    if threads < 1:
        raise MeshGnnError(f"threads must be >= 1, got {threads}")
    return threads
