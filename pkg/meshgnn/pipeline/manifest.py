"""Dataset manifests: one CSV row per sample, mesh paths in structure order.

A manifest may begin with ``# key: value`` comment lines (the generator
header); they are preserved on load and written back on save. Mesh paths are
stored relative to the manifest's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger

from meshgnn.exceptions import ManifestError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from meshgnn.mesh import IndexArray

BASE_COLUMNS: tuple[str, ...] = ("sample_id", "label", "age", "sex", "group")
GROUP_FIELDS: tuple[str, ...] = ("age", "sex", "group")
_HEADER_PREFIX = "#"


def mesh_columns(n_structures: int) -> list[str]:
    """``mesh_0 .. mesh_{N-1}``."""
    return [f"mesh_{s}" for s in range(n_structures)]


@dataclass
class Manifest:
    """Samples of a dataset with paths resolved against ``root``."""

    frame: pd.DataFrame
    root: Path
    header: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        """Number of samples."""
        return len(self.frame)

    @property
    def n_structures(self) -> int:
        """Number of ``mesh_*`` columns."""
        return sum(1 for c in self.frame.columns if str(c).startswith("mesh_"))

    @property
    def sample_ids(self) -> list[str]:
        """Sample ids in row order."""
        return [str(s) for s in self.frame["sample_id"]]

    @property
    def labels(self) -> IndexArray:
        """Class index per row."""
        return self.frame["label"].to_numpy(dtype=np.int64)

    def mesh_paths(self, row: int) -> list[Path]:
        """Absolute mesh paths of one row, in structure order."""
        record = self.frame.iloc[row]
        return [self.root / str(record[c]) for c in mesh_columns(self.n_structures)]

    def metadata(self, row: int) -> dict[str, object]:
        """Group fields of one row (missing values omitted)."""
        record = self.frame.iloc[row]
        meta: dict[str, object] = {}
        for name in GROUP_FIELDS:
            if name in self.frame.columns and not pd.isna(record[name]):
                value = record[name]
                meta[name] = float(value) if name == "age" else str(value)
        return meta

    def subset(self, rows: Sequence[int] | IndexArray) -> Manifest:
        """Manifest of the given rows, in the given order."""
        frame = self.frame.iloc[list(map(int, rows))].reset_index(drop=True)
        return Manifest(frame=frame, root=self.root, header=dict(self.header))

    def save(self, path: Path) -> Path:
        """Write the manifest with paths relative to ``path.parent``."""
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.frame.copy()
        dest = path.parent.resolve()
        for col in mesh_columns(self.n_structures):
            frame[col] = [
                Path(os.path.relpath((self.root / str(p)).resolve(), dest)).as_posix()
                for p in frame[col]
            ]
        lines = [f"{_HEADER_PREFIX} {k}: {v}\n" for k, v in self.header.items()]
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.writelines(lines)
            frame.to_csv(fh, index=False)
        logger.info(f"Манифест сохранён в {path} ({len(frame)} строк)")
        return path


def _read_header(path: Path) -> tuple[dict[str, str], int]:
    header: dict[str, str] = {}
    n_lines = 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith(_HEADER_PREFIX):
                break
            n_lines += 1
            key, sep, value = line[len(_HEADER_PREFIX) :].partition(":")
            if sep:
                header[key.strip()] = value.strip()
    return header, n_lines


def load_manifest(
    path: Path,
    *,
    n_structures: int | None = None,
    n_classes: int = 2,
    check_files: bool = True,
) -> Manifest:
    """Load and validate a manifest CSV.

    Raises
    ------
    ManifestError
        On missing columns, duplicate sample ids, out-of-range labels, a
        structure count different from *n_structures*, or missing mesh files.

    """
    if not path.is_file():
        raise ManifestError(f"Manifest not found: {path}")
    header, skip = _read_header(path)
    frame = pd.read_csv(
        path, skiprows=skip, dtype={"sample_id": str, "sex": str, "group": str}
    )

    for col in ("sample_id", "label"):
        if col not in frame.columns:
            raise ManifestError(f"{path}: missing column {col!r}")
    found = [str(c) for c in frame.columns if str(c).startswith("mesh_")]
    n = len(found)
    if n == 0 or found != mesh_columns(n):
        raise ManifestError(
            f"{path}: mesh columns must be mesh_0..mesh_{{N-1}} in order"
        )
    if n_structures is not None and n != n_structures:
        raise ManifestError(f"{path}: expected {n_structures} mesh columns, found {n}")

    duplicated = frame["sample_id"][frame["sample_id"].duplicated()].tolist()
    if duplicated:
        raise ManifestError(f"{path}: duplicate sample ids {duplicated[:5]}")
    labels = pd.to_numeric(frame["label"], errors="coerce")
    invalid = labels.isna() | (labels < 0) | (labels >= n_classes) | (labels % 1 != 0)
    bad = frame["sample_id"][invalid].tolist()
    if bad:
        raise ManifestError(
            f"{path}: labels must be integers in [0, {n_classes}); bad rows {bad[:5]}"
        )
    frame["label"] = labels.astype(np.int64)

    manifest = Manifest(frame=frame, root=path.parent, header=header)
    if check_files:
        for row in range(len(manifest)):
            for mesh_path in manifest.mesh_paths(row):
                if not mesh_path.is_file():
                    raise ManifestError(
                        f"{path}: sample {manifest.sample_ids[row]!r} "
                        f"references missing {mesh_path}"
                    )
    logger.debug(f"Загружен манифест {path}: {len(manifest)} образцов, {n} структур")
    return manifest
