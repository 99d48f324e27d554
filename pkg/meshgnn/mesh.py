"""Triangle meshes: OFF I/O, vertex normals, connectivity, radius queries."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from meshgnn.exceptions import InvalidMeshError, MeshFormatError

if TYPE_CHECKING:
    from pathlib import Path

FloatArray = NDArray[np.float64]
IndexArray = NDArray[np.int64]

FALLBACK_NORMAL = (0.0, 0.0, 1.0)

# Inflation for the tree query; exact distances are filtered afterwards.
_QUERY_SLACK = 1e-9


@dataclass(frozen=True, slots=True)
class Mesh:
    """Vertex positions (mm) and counter-clockwise triangular faces."""

    vertices: FloatArray
    faces: IndexArray

    def __post_init__(self) -> None:
        """Validate shapes, finiteness and face indices."""
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise InvalidMeshError(
                f"vertices must have shape (n, 3), got {self.vertices.shape}"
            )
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise InvalidMeshError(
                f"faces must have shape (m, 3), got {self.faces.shape}"
            )
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidMeshError("vertex coordinates must be finite")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise InvalidMeshError("face index out of range")
            a, b, c = self.faces.T
            if np.any((a == b) | (b == c) | (a == c)):
                raise InvalidMeshError("face repeats a vertex index")

    @classmethod
    def from_arrays(cls, vertices: object, faces: object) -> Mesh:
        """Build a mesh, coercing inputs to float64 / int64 arrays."""
        verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        return cls(vertices=verts, faces=tris)

    @property
    def n_vertices(self) -> int:
        """Number of vertices."""
        return int(self.vertices.shape[0])

    def transformed(
        self,
        rotation: FloatArray | None = None,
        translation: FloatArray | None = None,
        scale: float = 1.0,
    ) -> Mesh:
        """Return ``scale * R @ v + t`` for every vertex; faces are shared."""
        verts = self.vertices * scale
        if rotation is not None:
            verts = verts @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            verts = verts + np.asarray(translation, dtype=np.float64)
        return Mesh(vertices=verts, faces=self.faces)

    def with_vertices(self, vertices: FloatArray) -> Mesh:
        """Return a mesh with new vertex positions and the same faces."""
        return Mesh(vertices=vertices, faces=self.faces)


@dataclass(frozen=True, slots=True)
class NeighborIndex:
    """Radius neighborhoods in CSR layout, sorted by (distance, index).

    Neighbors of query ``i`` are ``indices[indptr[i]:indptr[i + 1]]`` with
    matching ``distances``; the query point itself is never listed.
    """

    indptr: IndexArray
    indices: IndexArray
    distances: FloatArray

    def __len__(self) -> int:
        """Number of query points."""
        return len(self.indptr) - 1

    def neighbors(self, query: int) -> list[tuple[int, float]]:
        """Return ``(index, distance)`` pairs for one query point."""
        lo, hi = int(self.indptr[query]), int(self.indptr[query + 1])
        return [
            (int(i), float(d))
            for i, d in zip(self.indices[lo:hi], self.distances[lo:hi], strict=True)
        ]

    def counts(self) -> IndexArray:
        """Neighbor count per query point."""
        return np.diff(self.indptr)

    def query_ids(self) -> IndexArray:
        """Query index of every stored neighbor entry."""
        return np.repeat(np.arange(len(self), dtype=np.int64), self.counts())


# ---------------------------------------------------------------------------
# OFF I/O
# ---------------------------------------------------------------------------


def _content_lines(text: str) -> list[tuple[int, list[str]]]:
    """Return ``(line_number, tokens)`` for non-blank lines, comments stripped."""
    out: list[tuple[int, list[str]]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            out.append((number, tokens))
    return out


def _parse_header(lines: list[tuple[int, list[str]]]) -> tuple[int, int]:
    if not lines or lines[0][1] != ["OFF"]:
        line = lines[0][0] if lines else 1
        raise MeshFormatError("missing OFF magic", line)
    if len(lines) < 2:
        raise MeshFormatError("missing counts line", lines[0][0])
    number, tokens = lines[1]
    if len(tokens) != 3:
        raise MeshFormatError("counts line must be 'nv nf ne'", number)
    try:
        nv, nf, _ne = (int(t) for t in tokens)
    except ValueError as e:
        raise MeshFormatError(f"non-integer counts: {' '.join(tokens)}", number) from e
    if nv < 0 or nf < 0:
        raise MeshFormatError("negative counts", number)
    return nv, nf


def _parse_vertices(
    body: list[tuple[int, list[str]]], nv: int
) -> tuple[FloatArray, list[tuple[int, list[str]]]]:
    """Read the first *nv* body lines as vertices; the rest are face lines."""
    if len(body) < nv:
        line = body[-1][0] if body else None
        raise MeshFormatError(
            f"vertex count mismatch: header declares {nv}, body has {len(body)}",
            line,
        )
    coords = np.empty((nv, 3), dtype=np.float64)
    for row, (number, tokens) in enumerate(body[:nv]):
        if len(tokens) != 3:
            raise MeshFormatError(
                f"vertex count mismatch: header declares {nv}, vertex {row} has "
                f"{len(tokens)} values",
                number,
            )
        try:
            coords[row] = [float(t) for t in tokens]
        except ValueError as e:
            raise MeshFormatError("non-numeric vertex coordinate", number) from e
        if not np.all(np.isfinite(coords[row])):
            raise MeshFormatError("non-finite vertex coordinate", number)
    return coords, body[nv:]


def _parse_faces(
    face_lines: list[tuple[int, list[str]]], nf: int, nv: int
) -> IndexArray:
    if len(face_lines) != nf:
        line = face_lines[-1][0] if face_lines else None
        raise MeshFormatError(
            f"face count mismatch: header declares {nf}, body has {len(face_lines)}",
            line,
        )
    faces = np.empty((nf, 3), dtype=np.int64)
    for row, (number, tokens) in enumerate(face_lines):
        try:
            values = [int(t) for t in tokens[:4]]
        except ValueError as e:
            raise MeshFormatError("non-integer face index", number) from e
        if values[0] != 3 or len(values) != 4:
            raise MeshFormatError("non-triangular face", number)
        tri = values[1:]
        if any(i < 0 or i >= nv for i in tri):
            raise MeshFormatError(f"face index out of range (nv={nv})", number)
        if len(set(tri)) != 3:
            raise MeshFormatError("face repeats a vertex index", number)
        faces[row] = tri
    return faces


def load_off(path: Path) -> Mesh:
    """Load an ASCII OFF triangle mesh.

    Raises
    ------
    MeshFormatError
        On a missing magic line, inconsistent counts, non-triangular faces or
        out-of-range indices; the message carries the offending line number.

    """
    lines = _content_lines(path.read_text(encoding="utf-8"))
    nv, nf = _parse_header(lines)
    vertices, face_lines = _parse_vertices(lines[2:], nv)
    faces = _parse_faces(face_lines, nf, nv)
    logger.trace(f"Загружен {path}: {nv} вершин, {nf} граней")
    return Mesh(vertices=vertices, faces=faces)


def save_off(mesh: Mesh, path: Path) -> Path:
    """Write *mesh* as ASCII OFF with 9 significant digits."""
    parts = ["OFF", f"{mesh.n_vertices} {len(mesh.faces)} 0"]
    parts.extend(f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices.tolist())
    parts.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def vertex_normals(mesh: Mesh) -> FloatArray:
    """Area-weighted vertex normals from face winding.

    The unnormalized cross product of a face has length ``2 * area`` and
    points along the face normal, so summing cross products is exactly the
    area-weighted sum of unit face normals. Degenerate faces add zero.
    Vertices whose accumulated normal vanishes get ``(0, 0, 1)``.
    """
    n = mesh.n_vertices
    normals = np.zeros((n, 3), dtype=np.float64)
    if len(mesh.faces):
        v = mesh.vertices
        f = mesh.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        corners = f.T.reshape(-1)
        weights = np.tile(cross, (3, 1))
        for axis in range(3):
            normals[:, axis] = np.bincount(
                corners, weights=weights[:, axis], minlength=n
            )
    norms = np.sqrt(np.sum(normals * normals, axis=1))
    valid = norms > 0
    normals[valid] /= norms[valid, None]
    normals[~valid] = FALLBACK_NORMAL
    return normals


def radius_neighbors(
    points: FloatArray, radius: float, max_neighbors: int
) -> NeighborIndex:
    """Neighbors within *radius* (inclusive), nearest first, capped.

    Ties in distance are broken by lower point index, so the output is fully
    determined by the input.
    """
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if max_neighbors < 1:
        raise ValueError(f"max_neighbors must be >= 1, got {max_neighbors}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    indptr = np.zeros(n + 1, dtype=np.int64)
    if n == 0:
        return NeighborIndex(indptr, np.empty(0, np.int64), np.empty(0, np.float64))

    tree = cKDTree(pts)
    candidates = tree.query_ball_point(pts, r=radius * (1 + _QUERY_SLACK))
    counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=n)
    queries = np.repeat(np.arange(n, dtype=np.int64), counts)
    flat = itertools.chain.from_iterable(candidates)
    idx = np.fromiter(flat, dtype=np.int64, count=int(counts.sum()))
    diff = pts[idx] - pts[queries]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    keep = (idx != queries) & (dist <= radius)
    queries, idx, dist = queries[keep], idx[keep], dist[keep]

    order = np.lexsort((idx, dist, queries))
    queries, idx, dist = queries[order], idx[order], dist[order]
    found = np.bincount(queries, minlength=n)
    first = np.concatenate([[0], np.cumsum(found)[:-1]])
    rank = np.arange(len(queries)) - first[queries]
    capped = rank < max_neighbors
    indptr[1:] = np.cumsum(np.minimum(found, max_neighbors))
    return NeighborIndex(indptr, idx[capped], dist[capped])


def edges_from_faces(mesh: Mesh) -> IndexArray:
    """Directed edge list ``(source, target)``, both directions, sorted."""
    if not len(mesh.faces):
        return np.empty((0, 2), dtype=np.int64)
    f = mesh.faces
    undirected = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    directed = np.concatenate([undirected, undirected[:, ::-1]]).astype(np.int64)
    n = np.int64(mesh.n_vertices)
    keys = np.unique(directed[:, 0] * n + directed[:, 1])
    return np.stack([keys // n, keys % n], axis=1)
