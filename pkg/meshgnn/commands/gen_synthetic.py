"""Implementation of the ``meshgnn gen-synthetic`` command."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from meshgnn.commands._helpers import emit
from meshgnn.pipeline.synthetic import SyntheticConfig, gen_synthetic

if TYPE_CHECKING:
    import argparse


def run_gen_synthetic(args: argparse.Namespace) -> None:
    """Run the ``gen-synthetic`` command."""
    config = SyntheticConfig(
        n_samples=args.samples,
        n_structures=args.structures,
        class_effect=args.class_effect,
        pose_mode=args.pose,
        domain_shift=args.domain_shift,
        seed=args.seed,
    )
    manifest_path = gen_synthetic(config, Path(args.out))
    emit(str(manifest_path))
