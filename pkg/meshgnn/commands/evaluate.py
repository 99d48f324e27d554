"""Implementation of the ``meshgnn evaluate`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from loguru import logger

from meshgnn.commands._helpers import (
    cache_from_args,
    df_to_csv_text,
    emit,
    format_metrics_text,
    metrics_frame,
    predictions_frame,
    roc_frame,
    threads_from_args,
    write_df_csv,
)
from meshgnn.nn.checkpoint import load_checkpoint
from meshgnn.pipeline.evaluation import evaluate
from meshgnn.pipeline.manifest import load_manifest

if TYPE_CHECKING:
    import argparse


def run_evaluate(args: argparse.Namespace) -> None:
    """Run the ``evaluate`` command and print the metrics."""
    checkpoint = load_checkpoint(Path(args.checkpoint))
    manifest = load_manifest(
        Path(args.manifest), n_classes=checkpoint.model_config.n_classes
    )
    metrics, predictions = evaluate(
        checkpoint,
        manifest,
        feature_mode=args.features,
        cache=cache_from_args(args),
        threads=threads_from_args(args),
        batch_size=args.batch or 128,
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(
            metrics.model_dump_json(indent=2) + "\n", encoding="utf-8"
        )
        logger.info(f"Метрики сохранены в {out / 'metrics.json'}")
        write_df_csv(roc_frame(metrics), out / "roc.csv", "ROC points")
        write_df_csv(
            predictions_frame(predictions), out / "predictions.csv", "Predictions"
        )
    if args.format == "csv":
        emit(df_to_csv_text(metrics_frame(metrics)))
    else:
        emit(format_metrics_text(metrics))
