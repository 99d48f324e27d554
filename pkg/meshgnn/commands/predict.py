"""Implementation of the ``meshgnn predict`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from meshgnn.commands._helpers import df_to_csv_text, emit, predictions_frame
from meshgnn.exceptions import ConfigMismatchError
from meshgnn.graph import assemble_sample, batch
from meshgnn.mesh import load_off
from meshgnn.models import Prediction
from meshgnn.nn.checkpoint import load_checkpoint
from meshgnn.nn.model import predict_proba

if TYPE_CHECKING:
    import argparse
    from collections.abc import Sequence

    from meshgnn.nn.checkpoint import Checkpoint


def predict_meshes(
    checkpoint: Checkpoint,
    mesh_paths: Sequence[Path],
    feature_mode: str | None = None,
) -> Prediction:
    """Class probabilities for one sample given as N mesh files."""
    if feature_mode is not None and feature_mode != checkpoint.feature_config.mode:
        raise ConfigMismatchError(
            "features", checkpoint.feature_config.mode, feature_mode
        )
    meshes = [load_off(p) for p in mesh_paths]
    sample = assemble_sample(
        meshes,
        0,
        None,
        checkpoint.feature_config.mode,
        n_structures=checkpoint.model_config.n_structures,
        sample_id=mesh_paths[0].parent.name if mesh_paths else "",
        config=checkpoint.feature_config,
    )
    probabilities = predict_proba(
        checkpoint.params, checkpoint.model_config, batch([sample])
    )[0]
    return Prediction(sample_id=sample.sample_id, probabilities=probabilities.tolist())


def run_predict(args: argparse.Namespace) -> None:
    """Run the ``predict`` command and print per-class probabilities."""
    checkpoint = load_checkpoint(Path(args.checkpoint))
    prediction = predict_meshes(
        checkpoint, [Path(p) for p in args.meshes], feature_mode=args.features
    )
    if args.format == "csv":
        emit(df_to_csv_text(predictions_frame([prediction])))
    else:
        emit(
            "\n".join(
                f"class {k}: {p:.17g}" for k, p in enumerate(prediction.probabilities)
            )
        )
