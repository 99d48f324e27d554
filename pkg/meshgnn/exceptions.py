"""Custom exception hierarchy for meshgnn.

All library-specific exceptions inherit from ``MeshGnnError`` so consumers
can catch ``except MeshGnnError`` to handle any meshgnn failure.
"""

from __future__ import annotations


class MeshGnnError(Exception):
    """Base exception for all meshgnn errors."""


class MeshFormatError(MeshGnnError):
    """Raised when an OFF file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        """Initialize with a message and the 1-based offending line number."""
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class InvalidMeshError(MeshGnnError):
    """Raised when mesh arrays violate the mesh invariants."""


class ZeroLengthPairError(MeshGnnError):
    """Raised when a Darboux frame is requested for coincident points."""


class DegenerateFrameError(MeshGnnError):
    """Raised when the pair direction is parallel to the source normal."""


class FeatureModeError(MeshGnnError):
    """Raised for an unknown node-feature mode."""


class SampleAssemblyError(MeshGnnError):
    """Raised when a sample does not receive exactly N structure meshes."""


class BatchError(MeshGnnError):
    """Raised when samples cannot be combined into one batch."""


class ShapeMismatchError(MeshGnnError):
    """Raised when layer inputs and parameters have inconsistent shapes."""


class ConfigMismatchError(MeshGnnError):
    """Raised when a checkpoint or batch disagrees with the expected config."""

    def __init__(self, field: str, expected: object, actual: object) -> None:
        """Initialize with the offending field and both values."""
        self.field = field
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Config mismatch in {field!r}: expected {expected!r}, got {actual!r}"
        )


class DegenerateLabelSetError(MeshGnnError):
    """Raised when ROC/AUC is requested for a single-class label set."""


class ManifestError(MeshGnnError):
    """Raised when a dataset manifest is malformed or references missing files."""


class SplitError(MeshGnnError):
    """Raised when a split leaves a required partition empty."""


class CheckpointError(MeshGnnError):
    """Raised when a checkpoint file is malformed or inconsistent."""
