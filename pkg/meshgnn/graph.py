"""Structure graphs, multi-graph samples, batching and node-jitter augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from meshgnn.config import FeatureConfig, FeatureMode
from meshgnn.exceptions import BatchError, SampleAssemblyError
from meshgnn.features import edge_attributes, node_features
from meshgnn.mesh import FloatArray, IndexArray, Mesh, edges_from_faces

if TYPE_CHECKING:
    from collections.abc import Sequence

DEFAULT_N_STRUCTURES = 15


@dataclass(frozen=True, slots=True)
class Graph:
    """One anatomical structure as a graph.

    ``edges`` rows are ``(source, target)``; ``node_positions`` and ``faces``
    are kept so features can be recomputed after augmentation.
    """

    node_features: FloatArray
    edges: IndexArray
    edge_attrs: FloatArray
    structure_id: int
    node_positions: FloatArray
    faces: IndexArray

    @property
    def n_nodes(self) -> int:
        """Number of nodes."""
        return int(self.node_features.shape[0])

    @property
    def feature_dim(self) -> int:
        """Width of the node feature matrix."""
        return int(self.node_features.shape[1])

    def mesh(self) -> Mesh:
        """Rebuild the mesh these nodes came from."""
        return Mesh(vertices=self.node_positions, faces=self.faces)


@dataclass(frozen=True, slots=True)
class Sample:
    """A labeled observation made of N structure graphs in structure order."""

    sample_id: str
    label: int
    graphs: tuple[Graph, ...]
    metadata: dict[str, object] = field(default_factory=dict)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    @property
    def n_structures(self) -> int:
        """Number of structure graphs."""
        return len(self.graphs)


@dataclass(frozen=True, slots=True)
class StructureBatch:
    """Disjoint union of one structure's graphs across the samples of a batch.

    ``assignment[i]`` is the batch position of node ``i``; ``node_counts``,
    ``edge_counts`` and ``face_counts`` give the member sizes in order.
    """

    node_features: FloatArray
    edges: IndexArray
    edge_attrs: FloatArray
    assignment: IndexArray
    node_positions: FloatArray
    faces: IndexArray
    node_counts: IndexArray
    edge_counts: IndexArray
    face_counts: IndexArray

    @property
    def n_nodes(self) -> int:
        """Total node count of the union."""
        return int(self.node_features.shape[0])

    @property
    def n_graphs(self) -> int:
        """Number of member graphs (the batch size)."""
        return len(self.node_counts)


@dataclass(frozen=True, slots=True)
class Batch:
    """Per-structure graph unions plus labels in sample order."""

    structures: tuple[StructureBatch, ...]
    labels: IndexArray
    sample_ids: tuple[str, ...]
    metadata: tuple[dict[str, object], ...]
    feature_config: FeatureConfig

    @property
    def size(self) -> int:
        """Number of samples."""
        return len(self.labels)

    @property
    def n_structures(self) -> int:
        """Number of structures per sample."""
        return len(self.structures)

    @property
    def feature_dim(self) -> int:
        """Node feature width shared by every structure."""
        return int(self.structures[0].node_features.shape[1])


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _effective_config(
    mode: FeatureMode | str, config: FeatureConfig | None
) -> FeatureConfig:
    cfg = config or FeatureConfig()
    if cfg.mode == mode:
        return cfg
    return FeatureConfig.model_validate({**cfg.model_dump(), "mode": mode})


def build_graph(
    mesh: Mesh,
    mode: FeatureMode | str,
    structure_id: int,
    *,
    config: FeatureConfig | None = None,
    features: FloatArray | None = None,
) -> Graph:
    """Build the graph of one structure mesh.

    *config* supplies FPFH parameters; *features* short-circuits feature
    extraction with a precomputed (e.g. cached) table.
    """
    edges = edges_from_faces(mesh)
    table = features if features is not None else node_features(mesh, mode, config)
    return Graph(
        node_features=np.asarray(table, dtype=np.float64),
        edges=edges,
        edge_attrs=edge_attributes(mesh.vertices, edges),
        structure_id=structure_id,
        node_positions=mesh.vertices,
        faces=mesh.faces,
    )


def assemble_sample(  # noqa: PLR0913
    meshes: Sequence[Mesh],
    label: int,
    metadata: dict[str, object] | None,
    mode: FeatureMode | str,
    *,
    n_structures: int = DEFAULT_N_STRUCTURES,
    sample_id: str = "",
    config: FeatureConfig | None = None,
    features: Sequence[FloatArray | None] | None = None,
) -> Sample:
    """Build a sample from exactly *n_structures* meshes in structure order."""
    if len(meshes) != n_structures:
        raise SampleAssemblyError(
            f"expected {n_structures} structure meshes, got {len(meshes)}"
        )
    cfg = _effective_config(mode, config)
    tables = features if features is not None else [None] * n_structures
    graphs = tuple(
        build_graph(mesh, cfg.mode, s, config=cfg, features=tables[s])
        for s, mesh in enumerate(meshes)
    )
    return Sample(
        sample_id=sample_id,
        label=int(label),
        graphs=graphs,
        metadata=dict(metadata or {}),
        feature_config=cfg,
    )


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------


def _union(graphs: Sequence[Graph]) -> StructureBatch:
    node_counts = np.array([g.n_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(node_counts)[:-1]]).astype(np.int64)
    return StructureBatch(
        node_features=np.concatenate([g.node_features for g in graphs]),
        edges=np.concatenate(
            [g.edges + off for g, off in zip(graphs, offsets, strict=True)]
        ).reshape(-1, 2),
        edge_attrs=np.concatenate([g.edge_attrs for g in graphs]).reshape(-1, 3),
        assignment=np.repeat(np.arange(len(graphs), dtype=np.int64), node_counts),
        node_positions=np.concatenate([g.node_positions for g in graphs]).reshape(
            -1, 3
        ),
        faces=np.concatenate(
            [g.faces + off for g, off in zip(graphs, offsets, strict=True)]
        ).reshape(-1, 3),
        node_counts=node_counts,
        edge_counts=np.array([len(g.edges) for g in graphs], dtype=np.int64),
        face_counts=np.array([len(g.faces) for g in graphs], dtype=np.int64),
    )


def batch(samples: Sequence[Sample]) -> Batch:
    """Combine samples into per-structure disjoint unions.

    Raises
    ------
    BatchError
        On an empty list, differing structure counts or differing node
        feature widths.

    """
    if not samples:
        raise BatchError("empty batch")
    n = samples[0].n_structures
    dim = samples[0].graphs[0].feature_dim
    for sample in samples:
        if sample.n_structures != n:
            raise BatchError(
                f"sample {sample.sample_id!r} has {sample.n_structures} "
                f"structures, expected {n}"
            )
        dims = {g.feature_dim for g in sample.graphs}
        if dims != {dim}:
            raise BatchError(
                f"heterogeneous feature dims in sample {sample.sample_id!r}: "
                f"{sorted(dims)} vs {dim}"
            )
    structures = tuple(_union([s.graphs[k] for s in samples]) for k in range(n))
    logger.trace(f"Батч: {len(samples)} образцов, {n} структур")
    return Batch(
        structures=structures,
        labels=np.array([s.label for s in samples], dtype=np.int64),
        sample_ids=tuple(s.sample_id for s in samples),
        metadata=tuple(dict(s.metadata) for s in samples),
        feature_config=samples[0].feature_config,
    )


def _split(values: np.ndarray, counts: IndexArray) -> list[np.ndarray]:
    return np.split(values, np.cumsum(counts)[:-1]) if len(counts) else []


def unbatch(b: Batch) -> list[Sample]:
    """Split a batch back into its samples (inverse of ``batch``)."""
    per_structure: list[list[Graph]] = []
    for k, sb in enumerate(b.structures):
        offsets = np.concatenate([[0], np.cumsum(sb.node_counts)[:-1]]).astype(np.int64)
        pieces = zip(
            _split(sb.node_features, sb.node_counts),
            _split(sb.edges, sb.edge_counts),
            _split(sb.edge_attrs, sb.edge_counts),
            _split(sb.node_positions, sb.node_counts),
            _split(sb.faces, sb.face_counts),
            offsets,
            strict=True,
        )
        per_structure.append(
            [
                Graph(
                    node_features=feats,
                    edges=edges - off,
                    edge_attrs=attrs,
                    structure_id=k,
                    node_positions=pos,
                    faces=faces - off,
                )
                for feats, edges, attrs, pos, faces, off in pieces
            ]
        )
    return [
        Sample(
            sample_id=b.sample_ids[i],
            label=int(b.labels[i]),
            graphs=tuple(graphs[i] for graphs in per_structure),
            metadata=dict(b.metadata[i]),
            feature_config=b.feature_config,
        )
        for i in range(b.size)
    ]


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def derive_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Generator for one (seed, epoch, sample) triple, independent of schedule."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, index]))


def augment(sample: Sample, max_offset: float, rng: np.random.Generator) -> Sample:
    """Jitter every node by an independent uniform offset in ``[-o, o]`` mm.

    Position-dependent node features and all edge attributes are recomputed
    from the jittered positions; edges, labels and metadata are unchanged.
    """
    if max_offset < 0:
        raise ValueError(f"max_offset must be >= 0, got {max_offset}")
    if max_offset == 0:
        return sample
    cfg = sample.feature_config
    graphs: list[Graph] = []
    for g in sample.graphs:
        noise = rng.uniform(-max_offset, max_offset, size=g.node_positions.shape)
        moved = g.mesh().with_vertices(g.node_positions + noise)
        feats = (
            g.node_features
            if cfg.mode == "constant"
            else node_features(moved, cfg.mode, cfg)
        )
        graphs.append(
            replace(
                g,
                node_features=feats,
                edge_attrs=edge_attributes(moved.vertices, g.edges),
                node_positions=moved.vertices,
            )
        )
    return replace(sample, graphs=tuple(graphs))
