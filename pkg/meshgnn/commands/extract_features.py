"""Implementation of the ``meshgnn extract-features`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from meshgnn.commands._helpers import emit, feature_config_from_args, threads_from_args
from meshgnn.pipeline.dataset import extract_features
from meshgnn.pipeline.manifest import load_manifest

if TYPE_CHECKING:
    import argparse


def run_extract_features(args: argparse.Namespace) -> None:
    """Run the ``extract-features`` command: fill the feature cache."""
    manifest = load_manifest(Path(args.manifest))
    config = feature_config_from_args(args, args.features)
    n_meshes = extract_features(
        manifest, config, Path(args.cache_dir), threads=threads_from_args(args)
    )
    emit(f"{n_meshes} meshes cached in {args.cache_dir} ({config.mode})")
