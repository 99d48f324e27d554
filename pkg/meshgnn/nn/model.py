"""Shared-submodel multi-graph classifier: forward pass, loss and gradients.

The same three-layer convolutional submodel embeds every structure graph;
pooled embeddings are concatenated in structure order and classified by a
two-layer fully connected head.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from meshgnn.exceptions import ConfigMismatchError, ShapeMismatchError
from meshgnn.nn.layers import (
    ConvOperator,
    GcnOperator,
    GraphConvOperator,
    SplineOperator,
    dense_forward,
    pool_matrix,
    relu,
)

if TYPE_CHECKING:
    from scipy import sparse

    from meshgnn.config import ModelConfig
    from meshgnn.graph import Batch, StructureBatch
    from meshgnn.mesh import FloatArray, IndexArray

ModelParameters = dict[str, "FloatArray"]


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name and shape of every trainable array, in a fixed order."""
    shapes: dict[str, tuple[int, ...]] = {}
    dims = [config.input_dim] + [config.hidden] * config.conv_layers
    for layer, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:], strict=True)):
        prefix = f"conv{layer}"
        if config.conv_kind == "spline":
            shapes[f"{prefix}.weight"] = (config.spline_kernel_size**3, d_in, d_out)
            shapes[f"{prefix}.root_weight"] = (d_in, d_out)
        elif config.conv_kind == "graphconv":
            shapes[f"{prefix}.root_weight"] = (d_in, d_out)
            shapes[f"{prefix}.weight"] = (d_in, d_out)
        else:
            shapes[f"{prefix}.weight"] = (d_in, d_out)
        shapes[f"{prefix}.bias"] = (d_out,)
    shapes["fc_hidden.weight"] = (config.n_structures * config.hidden, config.fc_hidden)
    shapes["fc_hidden.bias"] = (config.fc_hidden,)
    shapes["fc_out.weight"] = (config.fc_hidden, config.n_classes)
    shapes["fc_out.bias"] = (config.n_classes,)
    return shapes


def init_parameters(config: ModelConfig, rng: np.random.Generator) -> ModelParameters:
    """Weights uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, biases zero."""
    params: ModelParameters = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            bound = 1.0 / np.sqrt(shape[-2])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def check_parameters(params: ModelParameters, config: ModelConfig) -> None:
    """Raise ``ShapeMismatchError`` unless *params* matches *config* exactly."""
    expected = parameter_shapes(config)
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise ShapeMismatchError(
            f"parameter names differ: missing {missing}, unexpected {extra}"
        )
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeMismatchError(
                f"{name}: expected shape {shape}, got {params[name].shape}"
            )


def _layer_params(params: ModelParameters, layer: int) -> dict[str, FloatArray]:
    prefix = f"conv{layer}."
    return {
        k.removeprefix(prefix): v for k, v in params.items() if k.startswith(prefix)
    }


def _make_operator(config: ModelConfig, sb: StructureBatch) -> ConvOperator:
    if config.conv_kind == "gcn":
        return GcnOperator(sb.edges, sb.n_nodes)
    if config.conv_kind == "graphconv":
        return GraphConvOperator(sb.edges, sb.n_nodes)
    return SplineOperator(
        sb.edges, sb.edge_attrs, sb.n_nodes, config.spline_kernel_size
    )


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class _StructureTrace:
    operator: ConvOperator
    pool: sparse.csr_matrix
    inputs: list[FloatArray]
    pre_activations: list[FloatArray]


@dataclass(slots=True)
class _Trace:
    structures: list[_StructureTrace]
    embedding: FloatArray
    hidden_pre: FloatArray
    hidden: FloatArray
    logits: FloatArray


def _check_batch(config: ModelConfig, b: Batch) -> None:
    if b.n_structures != config.n_structures:
        raise ConfigMismatchError("n_structures", config.n_structures, b.n_structures)
    if b.feature_dim != config.input_dim:
        raise ConfigMismatchError("input_dim", config.input_dim, b.feature_dim)


def _forward(params: ModelParameters, config: ModelConfig, b: Batch) -> _Trace:
    _check_batch(config, b)
    traces: list[_StructureTrace] = []
    pooled: list[FloatArray] = []
    for sb in b.structures:
        trace = _StructureTrace(
            operator=_make_operator(config, sb),
            pool=pool_matrix(sb.assignment, b.size),
            inputs=[],
            pre_activations=[],
        )
        x = sb.node_features
        for layer in range(config.conv_layers):
            trace.inputs.append(x)
            z = trace.operator.forward(x, _layer_params(params, layer))
            trace.pre_activations.append(z)
            x = relu(z)
        pooled.append(np.asarray(trace.pool @ x))
        traces.append(trace)
    embedding = np.concatenate(pooled, axis=1)
    hidden_pre = dense_forward(
        embedding, params["fc_hidden.weight"], params["fc_hidden.bias"]
    )
    hidden = relu(hidden_pre)
    logits = dense_forward(hidden, params["fc_out.weight"], params["fc_out.bias"])
    return _Trace(traces, embedding, hidden_pre, hidden, logits)


def model_forward(params: ModelParameters, config: ModelConfig, b: Batch) -> FloatArray:
    """Logits of shape (batch size, n_classes)."""
    return _forward(params, config, b).logits


def structure_embeddings(
    params: ModelParameters, config: ModelConfig, b: Batch
) -> FloatArray:
    """Pooled submodel embeddings of shape (batch size, N, hidden)."""
    embedding = _forward(params, config, b).embedding
    return embedding.reshape(b.size, config.n_structures, config.hidden)


def softmax(logits: FloatArray) -> FloatArray:
    """Row-wise softmax with max-subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def predict_proba(params: ModelParameters, config: ModelConfig, b: Batch) -> FloatArray:
    """Class probabilities of shape (batch size, n_classes)."""
    return softmax(model_forward(params, config, b))


def cross_entropy(logits: FloatArray, labels: IndexArray) -> float:
    """Mean negative log-likelihood of *labels* under ``softmax(logits)``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(logits):
        raise ShapeMismatchError(f"{len(labels)} labels for {len(logits)} logit rows")
    if len(labels) and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError(f"labels must lie in [0, {logits.shape[1]})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(log_norm - picked))


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------


def loss_and_gradients(
    params: ModelParameters,
    config: ModelConfig,
    b: Batch,
    labels: IndexArray | None = None,
) -> tuple[float, ModelParameters]:
    """Mean cross-entropy and its gradient for every parameter.

    *labels* defaults to the batch labels. Structure contributions to the
    shared submodel gradients are accumulated in structure order.
    """
    targets = b.labels if labels is None else np.asarray(labels, dtype=np.int64)
    trace = _forward(params, config, b)
    loss = cross_entropy(trace.logits, targets)

    onehot = np.zeros_like(trace.logits)
    onehot[np.arange(len(targets)), targets] = 1.0
    grad_logits = (softmax(trace.logits) - onehot) / len(targets)

    grads: ModelParameters = {name: np.zeros_like(v) for name, v in params.items()}
    grads["fc_out.weight"] = trace.hidden.T @ grad_logits
    grads["fc_out.bias"] = grad_logits.sum(axis=0)
    grad_hidden = (grad_logits @ params["fc_out.weight"].T) * (trace.hidden_pre > 0)
    grads["fc_hidden.weight"] = trace.embedding.T @ grad_hidden
    grads["fc_hidden.bias"] = grad_hidden.sum(axis=0)
    grad_embedding = grad_hidden @ params["fc_hidden.weight"].T

    h = config.hidden
    for s, st in enumerate(trace.structures):
        grad_pooled = grad_embedding[:, s * h : (s + 1) * h]
        grad_x = np.asarray(st.pool.T @ grad_pooled)
        for layer in reversed(range(config.conv_layers)):
            grad_z = grad_x * (st.pre_activations[layer] > 0)
            grad_x, layer_grads = st.operator.backward(
                grad_z, st.inputs[layer], _layer_params(params, layer)
            )
            for key, value in layer_grads.items():
                grads[f"conv{layer}.{key}"] += value
    return loss, grads


def backward(
    params: ModelParameters, config: ModelConfig, b: Batch, labels: IndexArray
) -> ModelParameters:
    """Gradients of the mean cross-entropy with respect to every parameter."""
    return loss_and_gradients(params, config, b, labels)[1]
