"""Stratified splitting and the mini-batch Adam training loop."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from meshgnn.exceptions import ConfigMismatchError, DegenerateLabelSetError, SplitError
from meshgnn.graph import Sample, augment, batch, derive_rng
from meshgnn.models import SPLIT_NAMES, EpochRecord, TrainingInfo
from meshgnn.nn.checkpoint import Checkpoint, save_checkpoint
from meshgnn.nn.model import init_parameters, loss_and_gradients
from meshgnn.nn.optim import AdamState, adam_step
from meshgnn.pipeline.dataset import load_samples
from meshgnn.pipeline.evaluation import predict_samples, roc_auc

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from meshgnn.config import TrainConfig
    from meshgnn.features import FeatureCache
    from meshgnn.mesh import IndexArray
    from meshgnn.nn.model import ModelParameters
    from meshgnn.pipeline.manifest import Manifest

CHECKPOINT_NAME = "checkpoint.json"
EPOCH_LOG_NAME = "epochs.csv"
EPOCH_LOG_COLUMNS = ("epoch", "train_loss", "val_auc")


# ---------------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------------


def split_indices(
    labels: IndexArray, fractions: tuple[float, float, float], seed: int
) -> tuple[IndexArray, IndexArray, IndexArray]:
    """Label-stratified shuffle split into (train, val, test) row indices.

    Per class, ``round(f * n_c)`` rows go to train and to val (half rounds up)
    and the remainder to test. Indices are sorted within each partition.
    """
    if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0):
        raise ValueError(
            f"split fractions must be non-negative and sum to 1, got {fractions}"
        )
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    parts: list[list[IndexArray]] = [[], [], []]
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_c = len(members)
        n_train = min(int(math.floor(fractions[0] * n_c + 0.5)), n_c)
        n_val = min(int(math.floor(fractions[1] * n_c + 0.5)), n_c - n_train)
        parts[0].append(members[:n_train])
        parts[1].append(members[n_train : n_train + n_val])
        parts[2].append(members[n_train + n_val :])
        chunks = (p[-1] for p in parts)
        for name, frac, chunk in zip(SPLIT_NAMES, fractions, chunks, strict=True):
            if frac > 0 and len(chunk) == 0:
                logger.warning(f"В сплите {name} нет образцов класса {cls}")
    train, val, test = (
        np.sort(np.concatenate(p)).astype(np.int64) if p else np.empty(0, np.int64)
        for p in parts
    )
    return train, val, test


def split(
    manifest: Manifest, fractions: tuple[float, float, float], seed: int
) -> tuple[Manifest, Manifest, Manifest]:
    """Split *manifest* into train/val/test manifests (see ``split_indices``)."""
    train, val, test = split_indices(manifest.labels, fractions, seed)
    logger.debug(f"Размеры сплитов: train={len(train)} val={len(val)} test={len(test)}")
    return manifest.subset(train), manifest.subset(val), manifest.subset(test)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TrainResult:
    """Artifacts of one training run."""

    checkpoint_path: Path
    epoch_log_path: Path
    best_epoch: int
    val_auc: float | None
    epochs: list[EpochRecord]
    test_manifest: Manifest


def _shuffle_rng(seed: int, epoch: int) -> np.random.Generator:
    sequence = np.random.SeedSequence([seed, epoch], spawn_key=(1,))
    return np.random.default_rng(sequence)


def validation_score(
    params: ModelParameters, config: TrainConfig, samples: Sequence[Sample]
) -> tuple[float, float]:
    """Return ``(selection score, val AUC)``; AUC is NaN for one-class sets.

    The selection score is the AUC, or the accuracy when the AUC is undefined.
    """
    probabilities = predict_samples(params, config.model, samples, config.batch_size)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    try:
        _roc, auc = roc_auc(probabilities[:, 1], (labels == 1).astype(np.int64))
    except DegenerateLabelSetError:
        accuracy = float(np.mean(np.argmax(probabilities, axis=1) == labels))
        return accuracy, float("nan")
    return auc, auc


def _check_inputs(config: TrainConfig, manifest: Manifest) -> None:
    if config.model.input_dim != config.features.input_dim:
        raise ConfigMismatchError(
            "input_dim", config.features.input_dim, config.model.input_dim
        )
    if manifest.n_structures != config.model.n_structures:
        raise ConfigMismatchError(
            "n_structures", config.model.n_structures, manifest.n_structures
        )


def _write_epoch_log(records: Sequence[EpochRecord], path: Path) -> Path:
    frame = pd.DataFrame(
        [r.model_dump() for r in records], columns=list(EPOCH_LOG_COLUMNS)
    )
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
    logger.info(f"Лог эпох сохранён в {path} ({len(frame)} строк)")
    return path


def run_epoch(  # noqa: PLR0913
    params: ModelParameters,
    state: AdamState,
    config: TrainConfig,
    samples: Sequence[Sample],
    epoch: int,
    pool: ThreadPoolExecutor,
) -> tuple[ModelParameters, AdamState, float]:
    """One pass over *samples*; returns new params, state and mean loss."""
    order = _shuffle_rng(config.seed, epoch).permutation(len(samples))
    total = 0.0
    for start in range(0, len(order), config.batch_size):
        chunk = [int(i) for i in order[start : start + config.batch_size]]
        if config.aug_offset > 0:
            members = list(
                pool.map(
                    lambda i: augment(
                        samples[i], config.aug_offset, derive_rng(config.seed, epoch, i)
                    ),
                    chunk,
                )
            )
        else:
            members = [samples[i] for i in chunk]
        loss, grads = loss_and_gradients(params, config.model, batch(members))
        params, state = adam_step(params, grads, state, lr=config.lr)
        total += loss * len(chunk)
    return params, state, total / len(samples)


def train(
    config: TrainConfig,
    manifest: Manifest,
    out_dir: Path,
    *,
    cache: FeatureCache | None = None,
    threads: int = 1,
) -> TrainResult:
    """Train with best-validation retention and write all run artifacts.

    Writes ``checkpoint.json``, ``epochs.csv`` and the ``train.csv`` /
    ``val.csv`` / ``test.csv`` split manifests into *out_dir*.

    Raises
    ------
    SplitError
        If the train or validation split is empty.

    """
    _check_inputs(config, manifest)
    parts = split(manifest, config.split_fractions, config.seed)
    for name, part in zip(SPLIT_NAMES[:2], parts[:2], strict=True):
        if len(part) == 0:
            raise SplitError(
                f"empty {name} split ({len(manifest)} samples in manifest)"
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(SPLIT_NAMES, parts, strict=True):
        part.save(out_dir / f"{name}.csv")

    train_set = load_samples(parts[0], config.features, cache=cache, threads=threads)
    val_set = load_samples(
        parts[1],
        config.features,
        cache=cache,
        threads=threads,
        desc="Validation features",
    )

    params = init_parameters(config.model, np.random.default_rng(config.seed))
    state = AdamState.fresh(params)
    best_params = params
    best_score, best_auc = validation_score(params, config, val_set)
    best_epoch = 0
    records: list[EpochRecord] = []
    if math.isnan(best_auc):
        logger.warning("В валидации только один класс, эпоха выбирается по точности")
    best_score = -math.inf if config.max_epochs > 0 else best_score

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for epoch in tqdm(
            range(1, config.max_epochs + 1), desc="Training", unit="epoch", leave=False
        ):
            params, state, loss = run_epoch(
                params, state, config, train_set, epoch, pool
            )
            score, val_auc = validation_score(params, config, val_set)
            records.append(EpochRecord(epoch=epoch, train_loss=loss, val_auc=val_auc))
            logger.info(f"Эпоха {epoch}: train_loss={loss:.6f} val_auc={val_auc:.4f}")
            # strict: ties keep the earlier epoch
            if score > best_score:
                best_score, best_auc = score, val_auc
                best_epoch, best_params = epoch, params

    info = TrainingInfo(
        seed=config.seed,
        aug_offset=config.aug_offset,
        max_epochs=config.max_epochs,
        best_epoch=best_epoch,
        val_auc=best_auc,
        n_train=len(train_set),
        n_val=len(val_set),
    )
    checkpoint_path = save_checkpoint(
        Checkpoint(config.model, config.features, info, best_params),
        out_dir / CHECKPOINT_NAME,
    )
    log_path = _write_epoch_log(records, out_dir / EPOCH_LOG_NAME)
    logger.info(f"Лучшая эпоха {best_epoch} (val_auc={best_auc:.4f})")
    return TrainResult(
        checkpoint_path=checkpoint_path,
        epoch_log_path=log_path,
        best_epoch=best_epoch,
        val_auc=info.val_auc,
        epochs=records,
        test_manifest=parts[2],
    )
