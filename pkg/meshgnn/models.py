"""Pydantic models for training records, checkpoints and evaluation results."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

# ------------------------------------------------------------------
# Training records
# ------------------------------------------------------------------

Partition = Literal["train", "val", "test"]
"""Names of the three split partitions."""

SPLIT_NAMES: tuple[Partition, ...] = ("train", "val", "test")


class EpochRecord(BaseModel):
    """One row of the epoch log (``val_auc`` is NaN when undefined)."""

    model_config = ConfigDict(frozen=True)

    epoch: int
    train_loss: float
    val_auc: float


class TrainingInfo(BaseModel):
    """Training provenance embedded in a checkpoint header."""

    model_config = ConfigDict(frozen=True)

    seed: int
    aug_offset: float
    max_epochs: int
    best_epoch: int
    val_auc: float | None = None
    n_train: int = 0
    n_val: int = 0

    @field_validator("val_auc")
    @classmethod
    def _finite_or_none(cls, value: float | None) -> float | None:
        if value is not None and not math.isfinite(value):
            return None
        return value


# ------------------------------------------------------------------
# Evaluation results
# ------------------------------------------------------------------


class RocPoint(BaseModel):
    """One ``(false-positive rate, true-positive rate)`` point."""

    model_config = ConfigDict(frozen=True)

    fpr: float = Field(ge=0, le=1)
    tpr: float = Field(ge=0, le=1)


class GroupMetrics(BaseModel):
    """Metrics of one stratum; ROC/AUC are absent for single-class strata."""

    model_config = ConfigDict(frozen=True)

    group: str
    n_samples: int
    accuracy: float
    auc: float | None = None
    roc: list[RocPoint] = []
    degenerate: bool = False


class Metrics(BaseModel):
    """Classification metrics of one model on one test set."""

    model_config = ConfigDict(frozen=True)

    n_samples: int
    accuracy: float
    auc: float | None = None
    roc: list[RocPoint] = []
    degenerate: bool = False
    per_group: dict[str, list[GroupMetrics]] = {}
    bin_edges: dict[str, list[int]] = {}

    def format_summary(self) -> str:
        """One-line human-readable summary."""
        auc = f"{self.auc:.4f}" if self.auc is not None else "n/a"
        return f"n={self.n_samples} auc={auc} accuracy={self.accuracy:.4f}"


class Prediction(BaseModel):
    """Class probabilities for one sample."""

    model_config = ConfigDict(frozen=True)

    sample_id: str
    probabilities: list[float]

    @property
    def predicted_class(self) -> int:
        """Index of the most probable class (lowest index on ties)."""
        return self.probabilities.index(max(self.probabilities))
