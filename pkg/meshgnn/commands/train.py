"""Implementation of the ``meshgnn train`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd

from meshgnn.commands._helpers import (
    cache_from_args,
    df_to_csv_text,
    emit,
    threads_from_args,
    train_config_from_args,
)
from meshgnn.pipeline.manifest import load_manifest
from meshgnn.pipeline.training import EPOCH_LOG_COLUMNS, train

if TYPE_CHECKING:
    import argparse

    from meshgnn.pipeline.training import TrainResult


def _format_text(result: TrainResult) -> str:
    lines = ["epoch  train_loss  val_auc"]
    lines.extend(
        f"{r.epoch:5d}  {r.train_loss:10.6f}  {r.val_auc:7.4f}" for r in result.epochs
    )
    auc = "n/a" if result.val_auc is None else f"{result.val_auc:.4f}"
    lines.append(f"best epoch: {result.best_epoch} (val_auc {auc})")
    lines.append(f"checkpoint: {result.checkpoint_path}")
    return "\n".join(lines)


def run_train(args: argparse.Namespace) -> None:
    """Run the ``train`` command and print the epoch log."""
    manifest = load_manifest(Path(args.manifest), n_structures=args.structures)
    config = train_config_from_args(
        args,
        args.structures or manifest.n_structures,
        conv=args.conv,
        mode=args.features,
        aug=args.aug,
    )
    result = train(
        config,
        manifest,
        Path(args.out),
        cache=cache_from_args(args),
        threads=threads_from_args(args),
    )
    if args.format == "csv":
        frame = pd.DataFrame(
            [r.model_dump() for r in result.epochs], columns=list(EPOCH_LOG_COLUMNS)
        )
        emit(df_to_csv_text(frame))
    else:
        emit(_format_text(result))
