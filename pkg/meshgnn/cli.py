"""CLI entry point for meshgnn."""

from __future__ import annotations

import argparse
import math
import sys
from typing import TYPE_CHECKING, NoReturn

from loguru import logger
from pydantic import ValidationError

from meshgnn.commands.evaluate import run_evaluate
from meshgnn.commands.experiment import run_experiment
from meshgnn.commands.extract_features import run_extract_features
from meshgnn.commands.gen_synthetic import run_gen_synthetic
from meshgnn.commands.predict import run_predict
from meshgnn.commands.train import run_train
from meshgnn.config import CONV_KINDS, FEATURE_MODES, THREADS_ENV, Preset, load_preset
from meshgnn.exceptions import MeshGnnError
from meshgnn.pipeline.synthetic import DOMAIN_SHIFTS, POSE_MODES

if TYPE_CHECKING:
    from collections.abc import Callable

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

OUTPUT_FORMATS = ("text", "csv")
DEFAULT_AUG_OFFSETS = (0.0, 0.1, 0.5, 1.0)


class _ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with status 1."""

    def error(self, message: str) -> NoReturn:
        """Print usage and the error to stderr, then exit 1."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _aug_offset(value: str) -> float:
    """Parse ``--aug``; offsets are millimetres and must be non-negative."""
    try:
        offset = float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"aug must be a number, got {value!r}") from e
    if not offset >= 0:
        raise argparse.ArgumentTypeError("aug must be ≥ 0")
    return offset


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from e
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be ≥ 1, got {number}")
    return number


def _non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from e
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be ≥ 0, got {number}")
    return number


def _float(value: str) -> float:
    try:
        number = float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}") from e
    if not math.isfinite(number):
        raise argparse.ArgumentTypeError(f"must be finite, got {value!r}")
    return number


def _positive_float(value: str) -> float:
    number = _float(value)
    if number <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {number:g}")
    return number


def _non_negative_float(value: str) -> float:
    number = _float(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be ≥ 0, got {number:g}")
    return number


class CliApp:
    """Command-line interface for meshgnn."""

    def __init__(self, preset: Preset | None = None) -> None:
        """Initialize parser and command definitions."""
        self._preset = preset or load_preset()
        self._parser = self._build_parser()

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = _ArgumentParser(
            prog="meshgnn",
            description="Multi-graph neural networks for 3D mesh classification.",
        )
        subparsers = parser.add_subparsers(dest="command", required=True)

        self._add_gen_synthetic_parser(subparsers)
        self._add_extract_features_parser(subparsers)
        self._add_train_parser(subparsers)
        self._add_evaluate_parser(subparsers)
        self._add_predict_parser(subparsers)
        self._add_experiment_parser(subparsers)

        return parser

    # ------------------------------------------------------------------
    # Shared argument groups
    # ------------------------------------------------------------------

    def _add_feature_args(self, parser: argparse.ArgumentParser) -> None:
        """Add FPFH neighborhood arguments."""
        features = self._preset.features
        parser.add_argument(
            "--radius",
            type=_positive_float,
            default=features.radius,
            help=f"FPFH neighborhood radius in mm (default: {features.radius:g}).",
        )
        parser.add_argument(
            "--max-neighbors",
            type=_positive_int,
            default=features.max_neighbors,
            help=f"FPFH neighbor cap (default: {features.max_neighbors}).",
        )

    @staticmethod
    def _add_runtime_args(parser: argparse.ArgumentParser) -> None:
        """Add ``--cache-dir`` and ``--threads``."""
        parser.add_argument(
            "--cache-dir",
            default=None,
            help="Directory of the per-mesh feature cache (default: no cache).",
        )
        parser.add_argument(
            "--threads",
            type=_positive_int,
            default=None,
            help=(
                f"Feature-extraction worker threads (default: ${THREADS_ENV}, "
                "then 1). Never changes results."
            ),
        )

    @staticmethod
    def _add_format_arg(parser: argparse.ArgumentParser) -> None:
        parser.add_argument(
            "--format",
            choices=OUTPUT_FORMATS,
            default="text",
            help="Output format on stdout (default: text).",
        )

    def _add_training_args(self, parser: argparse.ArgumentParser) -> None:
        """Add hyperparameters shared by ``train`` and ``experiment``."""
        training, model = self._preset.training, self._preset.model
        parser.add_argument("--manifest", required=True, help="Dataset manifest CSV.")
        parser.add_argument(
            "--seed",
            type=_non_negative_int,
            default=training.seed,
            help=f"Seed for all run randomness (default: {training.seed}).",
        )
        parser.add_argument(
            "--epochs",
            type=_non_negative_int,
            default=training.max_epochs,
            help=f"Maximum training epochs (default: {training.max_epochs}).",
        )
        parser.add_argument(
            "--batch",
            type=_positive_int,
            default=training.batch_size,
            help=f"Mini-batch size in samples (default: {training.batch_size}).",
        )
        parser.add_argument(
            "--lr",
            type=_positive_float,
            default=training.lr,
            help=f"Adam learning rate (default: {training.lr:g}).",
        )
        parser.add_argument(
            "--hidden",
            type=_positive_int,
            default=model.hidden,
            help=f"Hidden feature width H (default: {model.hidden}).",
        )
        parser.add_argument(
            "--structures",
            type=_positive_int,
            default=None,
            help=(
                "Structures per sample N; must match the manifest "
                "(default: the manifest's mesh column count)."
            ),
        )
        parser.add_argument("--out", required=True, help="Output directory.")
        self._add_feature_args(parser)
        self._add_runtime_args(parser)
        self._add_format_arg(parser)

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def _add_gen_synthetic_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``gen-synthetic`` command parser."""
        parser = subparsers.add_parser(
            "gen-synthetic",
            help="Write a synthetic multi-structure mesh dataset and its manifest.",
        )
        parser.add_argument("--out", required=True, help="Output directory.")
        parser.add_argument(
            "--samples",
            type=_positive_int,
            default=600,
            help="Number of samples, at least 4 (default: 600).",
        )
        parser.add_argument(
            "--structures",
            type=_positive_int,
            default=4,
            help="Structure meshes per sample N (default: 4).",
        )
        parser.add_argument(
            "--class-effect",
            type=_non_negative_float,
            default=0.3,
            help="Class-1 bump height as a fraction of the radius (default: 0.3).",
        )
        parser.add_argument(
            "--pose",
            choices=POSE_MODES,
            default="aligned",
            help="Random rotation plus up to 50 mm translation when random.",
        )
        parser.add_argument(
            "--domain-shift",
            choices=DOMAIN_SHIFTS,
            default="none",
            help="Global +100 mm offset or x1.1 scale for out-of-distribution sets.",
        )
        parser.add_argument(
            "--seed",
            type=_non_negative_int,
            default=0,
            help="Random seed (default: 0).",
        )

    def _add_extract_features_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``extract-features`` command parser."""
        parser = subparsers.add_parser(
            "extract-features",
            help="Compute node features for every mesh of a manifest into the cache.",
        )
        parser.add_argument("--manifest", required=True, help="Dataset manifest CSV.")
        parser.add_argument(
            "--features",
            choices=FEATURE_MODES,
            default=self._preset.features.mode,
            help=f"Node feature mode (default: {self._preset.features.mode}).",
        )
        self._add_feature_args(parser)
        parser.add_argument(
            "--cache-dir", required=True, help="Per-mesh feature cache directory."
        )
        parser.add_argument(
            "--threads",
            type=_positive_int,
            default=None,
            help=f"Worker threads (default: ${THREADS_ENV}, then 1).",
        )

    def _add_train_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``train`` command parser."""
        parser = subparsers.add_parser(
            "train",
            help="Train a model with best-validation checkpointing.",
        )
        parser.add_argument(
            "--conv",
            choices=CONV_KINDS,
            default=self._preset.model.conv_kind,
            help=f"Graph convolution (default: {self._preset.model.conv_kind}).",
        )
        parser.add_argument(
            "--features",
            choices=FEATURE_MODES,
            default=self._preset.features.mode,
            help=f"Node feature mode (default: {self._preset.features.mode}).",
        )
        parser.add_argument(
            "--aug",
            type=_aug_offset,
            default=self._preset.training.aug_offset,
            help=(
                "Maximum node jitter in mm, e.g. 0.1, 0.5, 1.0 "
                f"(default: {self._preset.training.aug_offset:g}, no augmentation)."
            ),
        )
        self._add_training_args(parser)

    def _add_evaluate_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``evaluate`` command parser."""
        parser = subparsers.add_parser(
            "evaluate",
            help="Compute ROC/AUC, accuracy and per-group metrics of a checkpoint.",
        )
        parser.add_argument("--checkpoint", required=True, help="Checkpoint JSON file.")
        parser.add_argument("--manifest", required=True, help="Test manifest CSV.")
        parser.add_argument(
            "--features",
            choices=FEATURE_MODES,
            default=None,
            help="Expected feature mode; must match the checkpoint when given.",
        )
        parser.add_argument(
            "--batch",
            type=_positive_int,
            default=self._preset.training.batch_size,
            help=f"Inference batch size (default: {self._preset.training.batch_size}).",
        )
        parser.add_argument(
            "--out",
            default=None,
            help="Optional directory for metrics.json, roc.csv and predictions.csv.",
        )
        self._add_runtime_args(parser)
        self._add_format_arg(parser)

    def _add_predict_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``predict`` command parser."""
        parser = subparsers.add_parser(
            "predict",
            help="Print class probabilities for one sample given as N OFF meshes.",
        )
        parser.add_argument("--checkpoint", required=True, help="Checkpoint JSON file.")
        parser.add_argument(
            "--meshes",
            nargs="+",
            required=True,
            help="OFF files of the sample, in structure order.",
        )
        parser.add_argument(
            "--features",
            choices=FEATURE_MODES,
            default=None,
            help="Expected feature mode; must match the checkpoint when given.",
        )
        self._add_format_arg(parser)

    def _add_experiment_parser(
        self,
        subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    ) -> None:
        """Add the ``experiment`` command parser."""
        parser = subparsers.add_parser(
            "experiment",
            help="Train and evaluate a conv x features x augmentation grid.",
        )
        parser.add_argument(
            "--conv",
            nargs="+",
            choices=CONV_KINDS,
            default=list(CONV_KINDS),
            help="Graph convolutions to compare (default: all).",
        )
        parser.add_argument(
            "--features",
            nargs="+",
            choices=FEATURE_MODES,
            default=list(FEATURE_MODES),
            help="Node feature modes to compare (default: all).",
        )
        parser.add_argument(
            "--aug",
            nargs="+",
            type=_aug_offset,
            default=list(DEFAULT_AUG_OFFSETS),
            help="Maximum node jitter offsets in mm (default: 0 0.1 0.5 1.0).",
        )
        parser.add_argument(
            "--test-manifest",
            action="append",
            default=None,
            metavar="NAME=PATH",
            help="Extra named test set, e.g. shifted=ood/manifest.csv. Repeatable.",
        )
        self._add_training_args(parser)

    # ------------------------------------------------------------------
    # Dispatch
    # ------------------------------------------------------------------

    def _run_command(self, args: argparse.Namespace) -> None:
        """Dispatch parsed args to the target command implementation."""
        dispatch: dict[str, Callable[[argparse.Namespace], None]] = {
            "gen-synthetic": run_gen_synthetic,
            "extract-features": run_extract_features,
            "train": run_train,
            "evaluate": run_evaluate,
            "predict": run_predict,
            "experiment": run_experiment,
        }
        dispatch[args.command](args)

    def run(self, argv: list[str] | None = None) -> int:
        """Run the CLI with the given arguments and return the exit code."""
        try:
            args = self._parser.parse_args(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_USAGE
        try:
            self._run_command(args)
        except (MeshGnnError, ValidationError, OSError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            return EXIT_DATA
        return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    """Compatibility entry point for setuptools/CLI wrappers."""
    sys.exit(CliApp().run(argv))


if __name__ == "__main__":
    main()
