"""Graph convolutions, dense layers, ReLU and mean pooling with adjoints.

Operators are built once per graph union and reused for the forward and the
backward pass. Messages flow along ``(source, target)`` edges into the target,
so every adjacency below is indexed ``A[target, source]``.
"""

from __future__ import annotations

import itertools
from typing import TYPE_CHECKING, Protocol

import numpy as np
from loguru import logger
from scipy import sparse

from meshgnn.exceptions import ShapeMismatchError

if TYPE_CHECKING:
    from collections.abc import Mapping

    from meshgnn.mesh import FloatArray, IndexArray

LayerParams = dict[str, "FloatArray"]


class ConvOperator(Protocol):
    """Common interface of the three graph convolutions."""

    def forward(self, x: FloatArray, params: Mapping[str, FloatArray]) -> FloatArray:
        """Return the layer output for node features *x*."""
        ...

    def backward(
        self, grad_out: FloatArray, x: FloatArray, params: Mapping[str, FloatArray]
    ) -> tuple[FloatArray, LayerParams]:
        """Return ``(grad_x, grads)`` for upstream gradient *grad_out*."""
        ...


def _check_linear(
    x: FloatArray, weight: FloatArray, bias: FloatArray, name: str
) -> None:
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatchError(
            f"{name}: input {x.shape} does not match weight {weight.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise ShapeMismatchError(
            f"{name}: bias {bias.shape} does not match weight {weight.shape}"
        )


def _adjacency(edges: IndexArray, n_nodes: int) -> sparse.csr_matrix:
    """Edge-count matrix ``A[target, source]`` (duplicates summed)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= n_nodes):
        raise ShapeMismatchError(f"edge index out of range for {n_nodes} nodes")
    data = np.ones(len(edges), dtype=np.float64)
    return sparse.csr_matrix(
        (data, (edges[:, 1], edges[:, 0])), shape=(n_nodes, n_nodes)
    )


# ---------------------------------------------------------------------------
# GCN
# ---------------------------------------------------------------------------


class GcnOperator:
    """``D^-1/2 (A + I) D^-1/2 X W + b`` with binary adjacency."""

    def __init__(self, edges: IndexArray, n_nodes: int) -> None:
        """Precompute the normalized propagation matrix."""
        adj = _adjacency(edges, n_nodes)
        adj.data[:] = 1.0
        a_hat = (adj + sparse.identity(n_nodes, format="csr")).tocsr()
        degree = np.asarray(a_hat.sum(axis=1)).ravel()
        diag = np.arange(n_nodes)
        inv_sqrt = sparse.csr_matrix(
            (1.0 / np.sqrt(degree), (diag, diag)), shape=(n_nodes, n_nodes)
        )
        self.n_nodes = n_nodes
        self.matrix = (inv_sqrt @ a_hat @ inv_sqrt).tocsr()

    def forward(self, x: FloatArray, params: Mapping[str, FloatArray]) -> FloatArray:
        """Propagate ``X W`` over the normalized adjacency."""
        weight, bias = params["weight"], params["bias"]
        _check_linear(x, weight, bias, "gcn")
        return np.asarray(self.matrix @ (x @ weight)) + bias

    def backward(
        self, grad_out: FloatArray, x: FloatArray, params: Mapping[str, FloatArray]
    ) -> tuple[FloatArray, LayerParams]:
        """Adjoint of ``forward``."""
        weight = params["weight"]
        grad_xw = np.asarray(self.matrix.T @ grad_out)
        grads = {"weight": x.T @ grad_xw, "bias": grad_out.sum(axis=0)}
        return grad_xw @ weight.T, grads


# ---------------------------------------------------------------------------
# GraphConv
# ---------------------------------------------------------------------------


class GraphConvOperator:
    """``X W_root + (A X) W + b``: root term plus neighborhood sum."""

    def __init__(self, edges: IndexArray, n_nodes: int) -> None:
        """Precompute the edge-count adjacency."""
        self.n_nodes = n_nodes
        self.matrix = _adjacency(edges, n_nodes)

    def forward(self, x: FloatArray, params: Mapping[str, FloatArray]) -> FloatArray:
        """Apply the layer."""
        root, weight, bias = params["root_weight"], params["weight"], params["bias"]
        _check_linear(x, root, bias, "graphconv root")
        _check_linear(x, weight, bias, "graphconv")
        return x @ root + np.asarray(self.matrix @ x) @ weight + bias

    def backward(
        self, grad_out: FloatArray, x: FloatArray, params: Mapping[str, FloatArray]
    ) -> tuple[FloatArray, LayerParams]:
        """Adjoint of ``forward``."""
        root, weight = params["root_weight"], params["weight"]
        agg = np.asarray(self.matrix @ x)
        grads = {
            "root_weight": x.T @ grad_out,
            "weight": agg.T @ grad_out,
            "bias": grad_out.sum(axis=0),
        }
        grad_x = grad_out @ root.T + np.asarray(self.matrix.T @ (grad_out @ weight.T))
        return grad_x, grads


# ---------------------------------------------------------------------------
# Spline
# ---------------------------------------------------------------------------

_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)


def spline_basis_arrays(
    pseudo: FloatArray, kernel_size: int = 5
) -> tuple[IndexArray, FloatArray]:
    """Degree-1 open B-spline basis for every row of *pseudo* (E, 3).

    Returns ``(index, value)`` arrays of shape (E, 8), one column per corner of
    the enclosing knot cell; zero-valued corners are kept.
    """
    u = np.asarray(pseudo, dtype=np.float64).reshape(-1, 3)
    if kernel_size < 2:
        raise ValueError(f"kernel_size must be >= 2, got {kernel_size}")
    if np.any((u < 0) | (u > 1)):
        raise ValueError("pseudo-coordinates must lie in [0, 1]^3")
    pos = u * (kernel_size - 1)
    lower = np.minimum(np.floor(pos).astype(np.int64), kernel_size - 2)
    frac = pos - lower
    strides = kernel_size ** np.arange(3, dtype=np.int64)
    index = (lower[:, None, :] + _CORNERS[None]) @ strides
    value = np.prod(
        np.where(_CORNERS[None] == 1, frac[:, None, :], 1.0 - frac[:, None, :]), axis=2
    )
    return index, value


def spline_basis(
    u: FloatArray, kernel_size: int = 5, degree: int = 1
) -> list[tuple[int, float]]:
    """Non-zero ``(weight index, basis value)`` pairs for one pseudo-coordinate."""
    if degree != 1:
        raise ValueError(f"only degree-1 splines are supported, got {degree}")
    index, value = spline_basis_arrays(
        np.asarray(u, dtype=np.float64)[None], kernel_size
    )
    pairs = zip(index[0].tolist(), value[0].tolist(), strict=True)
    return [(i, v) for i, v in pairs if v != 0]


class SplineOperator:
    """Spline convolution with root weight and sum aggregation.

    ``x'_i = x_i W_root + sum_{j->i} sum_p B_p(u_ji) x_j W_p + b``. Edges are
    sorted by the knot cell enclosing their pseudo-coordinate; all edges of a
    cell touch the same 8 kernels, so each cell costs one matrix product
    against those kernels stacked side by side.
    """

    def __init__(
        self,
        edges: IndexArray,
        edge_attrs: FloatArray,
        n_nodes: int,
        kernel_size: int = 5,
    ) -> None:
        """Precompute the basis, cell grouping and scatter matrices."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edge_attrs) != len(edges):
            raise ShapeMismatchError(
                f"{len(edge_attrs)} edge attribute rows for {len(edges)} edges"
            )
        _adjacency(edges, n_nodes)
        self.n_nodes = n_nodes
        self.n_kernels = kernel_size**3
        index, value = spline_basis_arrays(edge_attrs, kernel_size)

        # corner (0, 0, 0) comes first, so column 0 is the cell's lower index
        cells = index[:, 0]
        order = np.argsort(cells, kind="stable")
        self._sources = edges[order, 0]
        self._basis = value[order]
        cell_ids, starts = np.unique(cells[order], return_index=True)
        bounds = np.append(starts, len(order))
        self._groups = [
            (index[order[lo], :], int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:], strict=True)
        ]
        n_edges = len(order)
        ones = np.ones(n_edges, dtype=np.float64)
        positions = np.arange(n_edges)
        self._source_matrix = sparse.csr_matrix(
            (ones, (self._sources, positions)), shape=(n_nodes, n_edges)
        )
        self._target_matrix = sparse.csr_matrix(
            (ones, (edges[order, 1], positions)), shape=(n_nodes, n_edges)
        )
        logger.trace(f"Spline: {n_edges} рёбер в {len(cell_ids)} ячейках ядра")

    def _check(self, x: FloatArray, params: Mapping[str, FloatArray]) -> None:
        weight = params["weight"]
        if weight.ndim != 3 or weight.shape[0] != self.n_kernels:
            raise ShapeMismatchError(
                f"spline weight must have shape ({self.n_kernels}, d_in, d_out), "
                f"got {weight.shape}"
            )
        _check_linear(x, weight[0], params["bias"], "spline")
        _check_linear(x, params["root_weight"], params["bias"], "spline root")

    @staticmethod
    def _stacked(weight: FloatArray, kernels: IndexArray) -> FloatArray:
        """Kernels of one cell as a (d_in, 8 * d_out) matrix."""
        d_in, d_out = weight.shape[1], weight.shape[2]
        return weight[kernels].transpose(1, 0, 2).reshape(d_in, len(kernels) * d_out)

    def forward(self, x: FloatArray, params: Mapping[str, FloatArray]) -> FloatArray:
        """Apply the layer."""
        self._check(x, params)
        weight = params["weight"]
        d_out = weight.shape[2]
        sources = x[self._sources]
        messages = np.empty((len(sources), d_out), dtype=np.float64)
        for kernels, lo, hi in self._groups:
            per_corner = (sources[lo:hi] @ self._stacked(weight, kernels)).reshape(
                hi - lo, len(kernels), d_out
            )
            messages[lo:hi] = np.einsum("ec,eco->eo", self._basis[lo:hi], per_corner)
        out = np.asarray(self._target_matrix @ messages)
        return out + x @ params["root_weight"] + params["bias"]

    def backward(
        self, grad_out: FloatArray, x: FloatArray, params: Mapping[str, FloatArray]
    ) -> tuple[FloatArray, LayerParams]:
        """Adjoint of ``forward``."""
        weight, root = params["weight"], params["root_weight"]
        d_in, d_out = weight.shape[1], weight.shape[2]
        sources = x[self._sources]
        grad_messages = np.asarray(self._target_matrix.T @ grad_out)
        grad_weight = np.zeros_like(weight)
        grad_sources = np.empty_like(sources)
        for kernels, lo, hi in self._groups:
            n_corners = len(kernels)
            grad_corner = (
                self._basis[lo:hi, :, None] * grad_messages[lo:hi, None, :]
            ).reshape(hi - lo, n_corners * d_out)
            grad_stacked = sources[lo:hi].T @ grad_corner
            grad_weight[kernels] += grad_stacked.reshape(
                d_in, n_corners, d_out
            ).transpose(1, 0, 2)
            grad_sources[lo:hi] = grad_corner @ self._stacked(weight, kernels).T
        grad_x = np.asarray(self._source_matrix @ grad_sources)
        grad_x += grad_out @ root.T
        grads = {
            "weight": grad_weight,
            "root_weight": x.T @ grad_out,
            "bias": grad_out.sum(axis=0),
        }
        return grad_x, grads


# ---------------------------------------------------------------------------
# Functional forms
# ---------------------------------------------------------------------------


def gcn_conv_forward(
    x: FloatArray, edges: IndexArray, weight: FloatArray, bias: FloatArray
) -> FloatArray:
    """One GCN layer on a single graph."""
    return GcnOperator(edges, len(x)).forward(x, {"weight": weight, "bias": bias})


def graph_conv_forward(
    x: FloatArray,
    edges: IndexArray,
    root_weight: FloatArray,
    weight: FloatArray,
    bias: FloatArray,
) -> FloatArray:
    """One GraphConv layer on a single graph."""
    params = {"root_weight": root_weight, "weight": weight, "bias": bias}
    return GraphConvOperator(edges, len(x)).forward(x, params)


def spline_conv_forward(  # noqa: PLR0913
    x: FloatArray,
    edges: IndexArray,
    edge_attrs: FloatArray,
    weight: FloatArray,
    root_weight: FloatArray,
    bias: FloatArray,
) -> FloatArray:
    """One spline convolution layer on a single graph."""
    kernel_size = round(weight.shape[0] ** (1 / 3))
    op = SplineOperator(edges, edge_attrs, len(x), kernel_size)
    return op.forward(x, {"weight": weight, "root_weight": root_weight, "bias": bias})


def relu(x: FloatArray) -> FloatArray:
    """Elementwise ``max(x, 0)``."""
    return np.maximum(x, 0.0)


def dense_forward(x: FloatArray, weight: FloatArray, bias: FloatArray) -> FloatArray:
    """Fully connected layer ``x W + b``."""
    _check_linear(x, weight, bias, "dense")
    return x @ weight + bias


def pool_matrix(assignment: IndexArray, n_graphs: int) -> sparse.csr_matrix:
    """Averaging matrix of shape (n_graphs, n); empty graphs give zero rows."""
    assignment = np.asarray(assignment, dtype=np.int64)
    if len(assignment) and (assignment.min() < 0 or assignment.max() >= n_graphs):
        raise ShapeMismatchError(
            f"assignment value out of range for {n_graphs} graphs"
        )
    counts = np.bincount(assignment, minlength=n_graphs).astype(np.float64)
    data = 1.0 / counts[assignment] if len(assignment) else np.empty(0)
    cols = np.arange(len(assignment))
    return sparse.csr_matrix(
        (data, (assignment, cols)), shape=(n_graphs, len(assignment))
    )


def global_mean_pool(
    x: FloatArray, assignment: IndexArray, n_graphs: int
) -> FloatArray:
    """Mean of node rows per graph."""
    return np.asarray(pool_matrix(assignment, n_graphs) @ x)
