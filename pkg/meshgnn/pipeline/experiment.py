"""Grid runs over convolution kind x node features x augmentation offset.

Each grid point is trained on the same manifest and evaluated on its own
held-out test split plus every named extra test set (e.g. domain-shifted
data), yielding one summary table and one table of ROC points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import pandas as pd
from loguru import logger

from meshgnn.config import FeatureConfig, ModelConfig, TrainConfig
from meshgnn.nn.checkpoint import load_checkpoint
from meshgnn.pipeline.evaluation import evaluate
from meshgnn.pipeline.training import train

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence
    from pathlib import Path

    from meshgnn.config import ConvKind, FeatureMode
    from meshgnn.features import FeatureCache
    from meshgnn.models import Metrics
    from meshgnn.pipeline.manifest import Manifest

INTERNAL_TEST_SET = "test"
SUMMARY_COLUMNS = (
    "run",
    "conv",
    "features",
    "aug",
    "test_set",
    "n_samples",
    "auc",
    "accuracy",
)
ROC_COLUMNS = ("run", "test_set", "fpr", "tpr")


@dataclass(frozen=True, slots=True)
class GridPoint:
    """One training configuration of the grid."""

    conv: ConvKind
    features: FeatureMode
    aug: float

    @property
    def name(self) -> str:
        """Directory-safe run name."""
        return f"{self.conv}-{self.features}-aug{self.aug:g}"


@dataclass(frozen=True, slots=True)
class ExperimentResult:
    """Summary and ROC tables of a finished grid."""

    summary: pd.DataFrame
    roc: pd.DataFrame
    summary_path: Path
    roc_path: Path


def grid_points(
    convs: Sequence[ConvKind], features: Sequence[FeatureMode], augs: Sequence[float]
) -> list[GridPoint]:
    """Cartesian product in (conv, features, aug) order."""
    combos = itertools.product(convs, features, augs)
    return [GridPoint(c, f, a) for c, f, a in combos]


def config_for(base: TrainConfig, point: GridPoint) -> TrainConfig:
    """*base* with the grid point's conv kind, feature mode and offset."""
    features = FeatureConfig.model_validate(
        {**base.features.model_dump(), "mode": point.features}
    )
    model = ModelConfig.model_validate(
        {
            **base.model.model_dump(),
            "conv_kind": point.conv,
            "input_dim": features.input_dim,
        }
    )
    return TrainConfig.model_validate(
        {
            **base.model_dump(),
            "features": features,
            "model": model,
            "aug_offset": point.aug,
        }
    )


def _rows(
    point: GridPoint, test_set: str, metrics: Metrics
) -> tuple[dict[str, object], list[dict[str, object]]]:
    summary = {
        "run": point.name,
        "conv": point.conv,
        "features": point.features,
        "aug": point.aug,
        "test_set": test_set,
        "n_samples": metrics.n_samples,
        "auc": metrics.auc,
        "accuracy": metrics.accuracy,
    }
    roc = [
        {"run": point.name, "test_set": test_set, "fpr": p.fpr, "tpr": p.tpr}
        for p in metrics.roc
    ]
    return summary, roc


def run_experiment(  # noqa: PLR0913
    base: TrainConfig,
    manifest: Manifest,
    points: Sequence[GridPoint],
    test_sets: Mapping[str, Manifest],
    out_dir: Path,
    *,
    cache: FeatureCache | None = None,
    threads: int = 1,
) -> ExperimentResult:
    """Train every grid point and evaluate it on every test set.

    Runs are written to ``out_dir/<run name>/``; ``summary.csv`` and
    ``roc.csv`` land in *out_dir*.
    """
    summary_rows: list[dict[str, object]] = []
    roc_rows: list[dict[str, object]] = []
    for index, point in enumerate(points, start=1):
        logger.info(f"Запуск {index}/{len(points)}: {point.name}")
        result = train(
            config_for(base, point),
            manifest,
            out_dir / point.name,
            cache=cache,
            threads=threads,
        )
        checkpoint = load_checkpoint(result.checkpoint_path)
        evaluations = {INTERNAL_TEST_SET: result.test_manifest, **test_sets}
        for name, test_manifest in evaluations.items():
            if len(test_manifest) == 0:
                logger.warning(
                    f"Тестовая выборка {name!r} пуста, пропускаю для {point.name}"
                )
                continue
            metrics, _predictions = evaluate(
                checkpoint,
                test_manifest,
                cache=cache,
                threads=threads,
                batch_size=base.batch_size,
            )
            summary, roc = _rows(point, name, metrics)
            summary_rows.append(summary)
            roc_rows.extend(roc)

    out_dir.mkdir(parents=True, exist_ok=True)
    summary_frame = pd.DataFrame(summary_rows, columns=list(SUMMARY_COLUMNS))
    roc_frame = pd.DataFrame(roc_rows, columns=list(ROC_COLUMNS))
    summary_path = out_dir / "summary.csv"
    roc_path = out_dir / "roc.csv"
    summary_frame.to_csv(summary_path, index=False, encoding="utf-8")
    roc_frame.to_csv(roc_path, index=False, encoding="utf-8")
    logger.info(
        f"Сводка эксперимента сохранена в {summary_path} ({len(summary_frame)} строк)"
    )
    return ExperimentResult(summary_frame, roc_frame, summary_path, roc_path)
