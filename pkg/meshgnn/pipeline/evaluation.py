"""ROC/AUC, accuracy and stratified (bias) metrics; checkpoint evaluation."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from scipy.stats import rankdata

from meshgnn.exceptions import ConfigMismatchError, DegenerateLabelSetError
from meshgnn.graph import batch
from meshgnn.models import GroupMetrics, Metrics, Prediction, RocPoint
from meshgnn.nn.model import predict_proba
from meshgnn.pipeline.dataset import load_samples

if TYPE_CHECKING:
    from collections.abc import Sequence

    from meshgnn.config import ModelConfig
    from meshgnn.features import FeatureCache
    from meshgnn.graph import Sample
    from meshgnn.mesh import FloatArray
    from meshgnn.nn.checkpoint import Checkpoint
    from meshgnn.nn.model import ModelParameters
    from meshgnn.pipeline.manifest import Manifest

AGE_BIN_EDGES: tuple[int, ...] = (18, 30, 40, 50, 60, 70, 80, 90)
STRATIFY_FIELDS: tuple[str, ...] = ("age", "sex", "group")


# ---------------------------------------------------------------------------
# ROC / AUC
# ---------------------------------------------------------------------------


def _binary_inputs(
    scores: Sequence[float] | FloatArray, labels: Sequence[int] | np.ndarray
) -> tuple[FloatArray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    if len(s) != len(y):
        raise ValueError(f"{len(s)} scores for {len(y)} labels")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    if y.sum() == 0 or y.sum() == len(y):
        raise DegenerateLabelSetError("degenerate label set")
    return s, y


def roc_auc(
    scores: Sequence[float] | FloatArray, labels: Sequence[int] | np.ndarray
) -> tuple[list[RocPoint], float]:
    """ROC curve over distinct score thresholds and the Mann-Whitney AUC.

    A sample is called positive when its score is at or above the threshold;
    tied scores move together, so the curve's trapezoidal area equals the
    AUC with ties counted half.

    Raises
    ------
    DegenerateLabelSetError
        If *labels* holds only one class.

    """
    s, y = _binary_inputs(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos

    ranks = rankdata(s)
    auc = (float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)

    order = np.argsort(-s, kind="stable")
    sorted_scores, sorted_labels = s[order], y[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    group_ends = np.flatnonzero(np.diff(sorted_scores) != 0)
    ends = np.append(group_ends, len(s) - 1)
    roc = [RocPoint(fpr=0.0, tpr=0.0)]
    roc.extend(RocPoint(fpr=fp[i] / n_neg, tpr=tp[i] / n_pos) for i in ends)
    return roc, auc


def _accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predicted == labels)) if len(labels) else 0.0


def age_group(age: float) -> str:
    """Decade bin label: ``<18``, ``18-29``, ``30-39``, ..., ``80-89``, ``90+``."""
    if age < AGE_BIN_EDGES[0]:
        return f"<{AGE_BIN_EDGES[0]}"
    if age >= AGE_BIN_EDGES[-1]:
        return f"{AGE_BIN_EDGES[-1]}+"
    upper = next(e for e in AGE_BIN_EDGES[1:] if age < e)
    lower = max(e for e in AGE_BIN_EDGES if e <= age)
    return f"{lower}-{upper - 1}"


def stratified_metrics(
    probabilities: Sequence[float] | FloatArray,
    labels: Sequence[int] | np.ndarray,
    groups: Sequence[str],
) -> list[GroupMetrics]:
    """Metrics computed independently within each group value.

    *probabilities* is the (n, C) class-probability matrix; a 1-D vector is
    read as positive-class scores of a two-class model. Predictions are the
    argmax class and AUC ranks column 1 against class 1. Groups holding a
    single class report accuracy only and are flagged ``degenerate``.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim == 1:
        p = np.column_stack([1.0 - p, p])
    y = np.asarray(labels, dtype=np.int64).ravel()
    predicted = np.argmax(p, axis=1)
    s = p[:, 1]
    binary = (y == 1).astype(np.int64)
    g = np.asarray([str(v) for v in groups], dtype=object)
    out: list[GroupMetrics] = []
    for value in sorted(set(g.tolist())):
        mask = g == value
        accuracy = _accuracy(predicted[mask], y[mask])
        try:
            roc, auc = roc_auc(s[mask], binary[mask])
        except DegenerateLabelSetError:
            out.append(
                GroupMetrics(
                    group=value,
                    n_samples=int(mask.sum()),
                    accuracy=accuracy,
                    degenerate=True,
                )
            )
            continue
        out.append(
            GroupMetrics(
                group=value,
                n_samples=int(mask.sum()),
                accuracy=accuracy,
                auc=auc,
                roc=roc,
            )
        )
    return out


def _group_values(
    metadata: Sequence[dict[str, object]], name: str
) -> list[str] | None:
    values = [m.get(name) for m in metadata]
    if any(v is None for v in values):
        return None
    if name == "age":
        return [age_group(float(v)) for v in values]  # type: ignore[arg-type]
    return [str(v) for v in values]


def compute_metrics(
    probabilities: FloatArray,
    labels: Sequence[int] | np.ndarray,
    metadata: Sequence[dict[str, object]] = (),
) -> Metrics:
    """Metrics from class probabilities; the positive-class score is column 1."""
    y = np.asarray(labels, dtype=np.int64)
    accuracy = _accuracy(np.argmax(probabilities, axis=1), y)
    scores = probabilities[:, 1]
    binary = (y == 1).astype(np.int64)
    try:
        roc, auc = roc_auc(scores, binary)
        degenerate = False
    except DegenerateLabelSetError:
        logger.warning("В выборке только один класс, AUC не считается")
        roc, auc, degenerate = [], None, True

    per_group: dict[str, list[GroupMetrics]] = {}
    if metadata:
        for name in STRATIFY_FIELDS:
            values = _group_values(metadata, name)
            if values is not None:
                per_group[name] = stratified_metrics(probabilities, y, values)
    bin_edges = {"age": list(AGE_BIN_EDGES)} if "age" in per_group else {}
    return Metrics(
        n_samples=len(y),
        accuracy=accuracy,
        auc=auc,
        roc=roc,
        degenerate=degenerate,
        per_group=per_group,
        bin_edges=bin_edges,
    )


# ---------------------------------------------------------------------------
# Checkpoint evaluation
# ---------------------------------------------------------------------------


def predict_samples(
    params: ModelParameters,
    config: ModelConfig,
    samples: Sequence[Sample],
    batch_size: int = 128,
) -> FloatArray:
    """Class probabilities for *samples*, computed in fixed-size batches."""
    chunks = [
        predict_proba(params, config, batch(samples[i : i + batch_size]))
        for i in range(0, len(samples), batch_size)
    ]
    if not chunks:
        return np.empty((0, config.n_classes), dtype=np.float64)
    return np.concatenate(chunks)


def check_compatible(
    checkpoint: Checkpoint, manifest: Manifest, feature_mode: str | None = None
) -> None:
    """Raise ``ConfigMismatchError`` naming the field that disagrees."""
    if manifest.n_structures != checkpoint.model_config.n_structures:
        raise ConfigMismatchError(
            "n_structures", checkpoint.model_config.n_structures, manifest.n_structures
        )
    if feature_mode is not None and feature_mode != checkpoint.feature_config.mode:
        raise ConfigMismatchError(
            "features", checkpoint.feature_config.mode, feature_mode
        )


def evaluate(  # noqa: PLR0913
    checkpoint: Checkpoint,
    manifest: Manifest,
    *,
    feature_mode: str | None = None,
    cache: FeatureCache | None = None,
    threads: int = 1,
    batch_size: int = 128,
) -> tuple[Metrics, list[Prediction]]:
    """Score every manifest sample without augmentation."""
    check_compatible(checkpoint, manifest, feature_mode)
    samples = load_samples(
        manifest, checkpoint.feature_config, cache=cache, threads=threads
    )
    probabilities = predict_samples(
        checkpoint.params, checkpoint.model_config, samples, batch_size
    )
    metrics = compute_metrics(
        probabilities, manifest.labels, [s.metadata for s in samples]
    )
    predictions = [
        Prediction(sample_id=s.sample_id, probabilities=p.tolist())
        for s, p in zip(samples, probabilities, strict=True)
    ]
    logger.info(f"Оценено образцов: {len(samples)}. {metrics.format_summary()}")
    return metrics, predictions
