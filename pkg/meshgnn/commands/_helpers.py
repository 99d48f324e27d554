"""Shared helpers for CLI commands."""

from __future__ import annotations

import io
import sys
from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd
from loguru import logger

from meshgnn.config import (
    FeatureConfig,
    Preset,
    TrainConfig,
    load_preset,
    resolve_threads,
)
from meshgnn.features import FeatureCache

if TYPE_CHECKING:
    import argparse

    from meshgnn.models import Metrics, Prediction


def emit(text: str) -> None:
    """Write a command result to standard output."""
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def write_df_csv(df: pd.DataFrame, path: Path, label: str) -> None:
    """Write a DataFrame to CSV and log the result."""
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, encoding="utf-8")
    logger.info(f"{label} saved to {path} ({len(df)} rows)")


def df_to_csv_text(df: pd.DataFrame) -> str:
    """Render a DataFrame as CSV text."""
    buffer = io.StringIO()
    df.to_csv(buffer, index=False)
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# Argument resolution
# ---------------------------------------------------------------------------


def threads_from_args(args: argparse.Namespace, preset: Preset | None = None) -> int:
    """Worker count: ``--threads``, then ``MESHGNN_THREADS``, then preset."""
    return resolve_threads(args.threads, preset)


def cache_from_args(args: argparse.Namespace) -> FeatureCache | None:
    """Feature cache for ``--cache-dir`` (``None`` when not given)."""
    return FeatureCache(Path(args.cache_dir)) if args.cache_dir else None


def feature_config_from_args(
    args: argparse.Namespace, mode: str | None, preset: Preset | None = None
) -> FeatureConfig:
    """Preset feature settings overridden by *mode* and ``--radius/--max-neighbors``."""
    base = (preset or load_preset()).features
    overrides = {
        "mode": mode,
        "radius": args.radius,
        "max_neighbors": args.max_neighbors,
    }
    return FeatureConfig.model_validate(
        {**base.model_dump(), **{k: v for k, v in overrides.items() if v is not None}}
    )


def train_config_from_args(  # noqa: PLR0913
    args: argparse.Namespace,
    n_structures: int,
    *,
    conv: str | None,
    mode: str | None,
    aug: float | None,
    preset: Preset | None = None,
) -> TrainConfig:
    """Assemble a ``TrainConfig`` from flags, falling back to the preset."""
    preset = preset or load_preset()
    features = feature_config_from_args(args, mode, preset)
    model = preset.build_model_config(
        conv_kind=conv,
        hidden=args.hidden,
        n_structures=n_structures,
        input_dim=features.input_dim,
    )
    training = preset.training.model_dump()
    overrides = {
        "seed": args.seed,
        "batch_size": args.batch,
        "lr": args.lr,
        "max_epochs": args.epochs,
        "aug_offset": aug,
    }
    training.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.model_validate(
        {**training, "features": features, "model": model}
    )


# ---------------------------------------------------------------------------
# Result formatting
# ---------------------------------------------------------------------------


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6f}"


def format_metrics_text(metrics: Metrics) -> str:
    """Human-readable metrics document with ROC points and group blocks."""
    lines = [
        f"n_samples: {metrics.n_samples}",
        f"auc: {_fmt(metrics.auc)}",
        f"accuracy: {_fmt(metrics.accuracy)}",
        "roc (fpr tpr):",
    ]
    lines.extend(f"  {p.fpr:.6f} {p.tpr:.6f}" for p in metrics.roc)
    for name, groups in metrics.per_group.items():
        lines.append(f"[{name}]")
        if name in metrics.bin_edges:
            edges = " ".join(str(e) for e in metrics.bin_edges[name])
            lines.append(f"  bin_edges: {edges}")
        for g in groups:
            flag = " (single class)" if g.degenerate else ""
            lines.append(
                f"  {g.group}: n={g.n_samples} auc={_fmt(g.auc)} "
                f"accuracy={_fmt(g.accuracy)}{flag}"
            )
    return "\n".join(lines) + "\n"


def metrics_frame(metrics: Metrics) -> pd.DataFrame:
    """Overall and per-group metrics as one table."""
    rows: list[dict[str, object]] = [
        {
            "field": "all",
            "group": "all",
            "n_samples": metrics.n_samples,
            "auc": metrics.auc,
            "accuracy": metrics.accuracy,
        }
    ]
    for name, groups in metrics.per_group.items():
        rows.extend(
            {
                "field": name,
                "group": g.group,
                "n_samples": g.n_samples,
                "auc": g.auc,
                "accuracy": g.accuracy,
            }
            for g in groups
        )
    return pd.DataFrame(
        rows, columns=["field", "group", "n_samples", "auc", "accuracy"]
    )


def roc_frame(metrics: Metrics) -> pd.DataFrame:
    """ROC points as a two-column table."""
    return pd.DataFrame(
        [{"fpr": p.fpr, "tpr": p.tpr} for p in metrics.roc], columns=["fpr", "tpr"]
    )


def predictions_frame(predictions: list[Prediction]) -> pd.DataFrame:
    """One row per sample: ``p_<class>`` columns and the predicted class."""
    n_classes = len(predictions[0].probabilities) if predictions else 2
    columns = ["sample_id", *[f"p_{k}" for k in range(n_classes)], "predicted"]
    rows = [
        [p.sample_id, *p.probabilities, p.predicted_class] for p in predictions
    ]
    return pd.DataFrame(rows, columns=columns)
