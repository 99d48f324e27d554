"""Implementation of the ``meshgnn experiment`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from meshgnn.commands._helpers import (
    cache_from_args,
    df_to_csv_text,
    emit,
    threads_from_args,
    train_config_from_args,
)
from meshgnn.exceptions import ManifestError
from meshgnn.pipeline import experiment as grid
from meshgnn.pipeline.manifest import load_manifest

if TYPE_CHECKING:
    import argparse

    from meshgnn.pipeline.manifest import Manifest


def parse_test_sets(
    entries: list[str] | None, n_structures: int
) -> dict[str, Manifest]:
    """Load ``NAME=PATH`` test manifests; names must be unique."""
    test_sets: dict[str, Manifest] = {}
    for entry in entries or []:
        name, sep, path = entry.partition("=")
        if not sep or not name or not path:
            raise ManifestError(f"--test-manifest expects NAME=PATH, got {entry!r}")
        if name in test_sets or name == "test":
            raise ManifestError(f"duplicate test set name {name!r}")
        test_sets[name] = load_manifest(Path(path), n_structures=n_structures)
    return test_sets


def run_experiment(args: argparse.Namespace) -> None:
    """Run the ``experiment`` command and print the summary table."""
    manifest = load_manifest(Path(args.manifest), n_structures=args.structures)
    n_structures = args.structures or manifest.n_structures
    base = train_config_from_args(args, n_structures, conv=None, mode=None, aug=None)
    points = grid.grid_points(args.conv, args.features, args.aug)
    result = grid.run_experiment(
        base,
        manifest,
        points,
        parse_test_sets(args.test_manifest, n_structures),
        Path(args.out),
        cache=cache_from_args(args),
        threads=threads_from_args(args),
    )
    if args.format == "csv":
        emit(df_to_csv_text(result.summary))
    else:
        emit(result.summary.to_string(index=False, float_format=lambda x: f"{x:.4f}"))
