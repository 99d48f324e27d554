"""Self-describing JSON checkpoint: configs, training info and parameters.

Every array is stored as its shape plus row-major values written with 17
significant digits, so a save/load cycle reproduces the float64 values
exactly. Keys are sorted so identical runs produce identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from pydantic import ValidationError

from meshgnn.config import FeatureConfig, ModelConfig
from meshgnn.exceptions import CheckpointError, ShapeMismatchError
from meshgnn.models import TrainingInfo
from meshgnn.nn.model import check_parameters

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.nn.model import ModelParameters

CHECKPOINT_FORMAT = "meshgnn-checkpoint/1"


@dataclass(frozen=True, slots=True)
class Checkpoint:
    """A trained model with everything needed to rebuild its inputs."""

    model_config: ModelConfig
    feature_config: FeatureConfig
    training: TrainingInfo
    params: ModelParameters


def _encode(array: np.ndarray) -> dict[str, object]:
    return {
        "shape": list(array.shape),
        "values": " ".join(f"{x:.17g}" for x in array.ravel().tolist()),
    }


def _decode(name: str, entry: object) -> np.ndarray:
    if not isinstance(entry, dict) or "shape" not in entry or "values" not in entry:
        raise CheckpointError(
            f"parameter {name!r} must be an object with shape and values"
        )
    shape = tuple(int(d) for d in entry["shape"])
    raw = str(entry["values"]).split()
    try:
        values = np.array([float(x) for x in raw], dtype=np.float64)
    except ValueError as e:
        raise CheckpointError(f"parameter {name!r} has non-numeric values") from e
    if values.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(
            f"parameter {name!r}: {values.size} values do not fill shape {shape}"
        )
    if not np.all(np.isfinite(values)):
        raise CheckpointError(f"parameter {name!r} has non-finite values")
    return values.reshape(shape)


def dumps_checkpoint(checkpoint: Checkpoint) -> str:
    """Serialize *checkpoint* to its JSON text."""
    document = {
        "format": CHECKPOINT_FORMAT,
        "model": checkpoint.model_config.model_dump(mode="json"),
        "features": checkpoint.feature_config.model_dump(mode="json"),
        "training": checkpoint.training.model_dump(mode="json"),
        "parameters": {name: _encode(p) for name, p in checkpoint.params.items()},
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    """Write *checkpoint* to *path* (parent directories are created)."""
    check_parameters(checkpoint.params, checkpoint.model_config)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_checkpoint(checkpoint), encoding="utf-8")
    logger.info(f"Чекпоинт сохранён в {path}")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read and validate a checkpoint.

    Raises
    ------
    CheckpointError
        On malformed JSON, an unknown format tag, invalid configs, or
        parameter shapes that disagree with the embedded model config.

    """
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not a JSON document ({e})") from e
    if not isinstance(document, dict) or document.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: missing or unknown format tag")
    try:
        model_config = ModelConfig.model_validate(document["model"])
        feature_config = FeatureConfig.model_validate(document["features"])
        training = TrainingInfo.model_validate(document["training"])
    except (KeyError, ValidationError) as e:
        raise CheckpointError(f"{path}: invalid header ({e})") from e

    entries = document.get("parameters")
    if not isinstance(entries, dict):
        raise CheckpointError(f"{path}: missing parameters")
    params = {name: _decode(name, entry) for name, entry in entries.items()}
    try:
        check_parameters(params, model_config)
    except ShapeMismatchError as e:
        raise CheckpointError(f"{path}: {e}") from e
    if feature_config.input_dim != model_config.input_dim:
        raise CheckpointError(
            f"{path}: feature mode {feature_config.mode!r} gives input_dim "
            f"{feature_config.input_dim}, model expects {model_config.input_dim}"
        )
    logger.debug(
        f"Загружен чекпоинт {path} "
        f"({model_config.conv_kind}, {feature_config.mode})"
    )
    return Checkpoint(model_config, feature_config, training, params)
