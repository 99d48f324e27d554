"""Node features (constant, positional, FPFH) and spherical edge attributes."""

from __future__ import annotations

import hashlib
import json
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy import sparse

from meshgnn.config import FEATURE_MODES, FeatureConfig
from meshgnn.exceptions import (
    DegenerateFrameError,
    FeatureModeError,
    ZeroLengthPairError,
)
from meshgnn.mesh import FloatArray, IndexArray, radius_neighbors, vertex_normals

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.mesh import Mesh, NeighborIndex

DEFAULT_BINS = 11
_FRAME_EPS = 1e-12
_ANGLE_RANGES = ((-1.0, 1.0), (-1.0, 1.0), (-np.pi, np.pi))
BoolArray = NDArray[np.bool_]


class DarbouxAngles(NamedTuple):
    """Angular variation of a point pair in its Darboux frame."""

    alpha: float
    phi: float
    theta: float


class PairFeatures(NamedTuple):
    """Vectorized Darboux angles for many pairs plus a validity mask."""

    alpha: FloatArray
    phi: FloatArray
    theta: FloatArray
    valid: BoolArray


# ---------------------------------------------------------------------------
# Darboux frame
# ---------------------------------------------------------------------------


def darboux_angles(
    p_r: FloatArray, n_r: FloatArray, p_k: FloatArray, n_k: FloatArray
) -> DarbouxAngles:
    """Return (alpha, phi, theta) for one pair after source selection.

    The point whose normal makes the smaller angle with the joining line is
    used as the source; on an exact tie ``p_r`` stays the source.

    Raises
    ------
    ZeroLengthPairError
        If the points coincide.
    DegenerateFrameError
        If the joining direction is parallel to the source normal.

    """
    feats = pair_features(
        np.asarray(p_r, dtype=np.float64)[None],
        np.asarray(n_r, dtype=np.float64)[None],
        np.asarray(p_k, dtype=np.float64)[None],
        np.asarray(n_k, dtype=np.float64)[None],
    )
    diff = np.asarray(p_k, dtype=np.float64) - np.asarray(p_r, dtype=np.float64)
    if not np.any(diff):
        raise ZeroLengthPairError("zero-length pair")
    if not feats.valid[0]:
        raise DegenerateFrameError("pair direction is parallel to the source normal")
    return DarbouxAngles(
        float(feats.alpha[0]), float(feats.phi[0]), float(feats.theta[0])
    )


def pair_features(
    p_r: FloatArray, n_r: FloatArray, p_k: FloatArray, n_k: FloatArray
) -> PairFeatures:
    """Darboux angles for row-aligned pair arrays of shape (m, 3).

    Invalid rows (coincident points or degenerate frames) are flagged in
    ``valid`` and carry zeros.
    """
    diff = p_k - p_r
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    nonzero = dist > 0
    d_hat = np.zeros_like(diff)
    d_hat[nonzero] = diff[nonzero] / dist[nonzero, None]

    cos_r = np.abs(np.sum(n_r * d_hat, axis=1))
    cos_k = np.abs(np.sum(n_k * d_hat, axis=1))
    swap = cos_r < cos_k
    u = np.where(swap[:, None], n_k, n_r)
    other = np.where(swap[:, None], n_r, n_k)
    direction = np.where(swap[:, None], -d_hat, d_hat)

    v = np.cross(direction, u)
    v_norm = np.sqrt(np.sum(v * v, axis=1))
    valid = nonzero & (v_norm >= _FRAME_EPS)
    v[valid] /= v_norm[valid, None]
    w = np.cross(u, v)

    alpha = np.sum(v * other, axis=1)
    phi = np.sum(u * direction, axis=1)
    theta = np.arctan2(np.sum(w * other, axis=1), np.sum(u * other, axis=1))
    theta = np.where(theta <= -np.pi, np.pi, theta)

    alpha = np.where(valid, np.clip(alpha, -1.0, 1.0), 0.0)
    phi = np.where(valid, np.clip(phi, -1.0, 1.0), 0.0)
    theta = np.where(valid, theta, 0.0)
    return PairFeatures(alpha, phi, theta, valid)


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------


def _bin_index(values: FloatArray, lo: float, hi: float, bins: int) -> IndexArray:
    """Uniform bin over [lo, hi]; the upper boundary falls in the last bin."""
    scaled = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(scaled, 0, bins - 1)


def spfh_matrix(
    points: FloatArray,
    normals: FloatArray,
    neighbor_index: NeighborIndex,
    bins: int = DEFAULT_BINS,
    *,
    normalize: bool = True,
) -> FloatArray:
    """SPFH for every query point: ``[alpha-hist | phi-hist | theta-hist]``.

    Each sub-histogram is normalized by the number of valid pairs of its
    query point; points without valid pairs keep an all-zero row.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    n = len(neighbor_index)
    queries = neighbor_index.query_ids()
    partners = neighbor_index.indices
    feats = pair_features(
        points[queries], normals[queries], points[partners], normals[partners]
    )
    q = queries[feats.valid]
    hist = np.zeros((n, 3 * bins), dtype=np.float64)
    for block, (lo, hi) in enumerate(_ANGLE_RANGES):
        b = _bin_index(feats[block][feats.valid], lo, hi, bins)
        counts = np.bincount(q * bins + b, minlength=n * bins).reshape(n, bins)
        hist[:, block * bins : (block + 1) * bins] = counts
    if normalize:
        totals = np.bincount(q, minlength=n).astype(np.float64)
        has_pairs = totals > 0
        hist[has_pairs] /= totals[has_pairs, None]
    return hist


def spfh(
    points: FloatArray,
    normals: FloatArray,
    neighbor_index: NeighborIndex,
    query: int,
    bins: int = DEFAULT_BINS,
    *,
    normalize: bool = True,
) -> FloatArray:
    """SPFH of a single query vertex (a ``3 * bins`` vector)."""
    hist = np.zeros(3 * bins, dtype=np.float64)
    total = 0
    for partner, _dist in neighbor_index.neighbors(query):
        try:
            angles = darboux_angles(
                points[query], normals[query], points[partner], normals[partner]
            )
        except (ZeroLengthPairError, DegenerateFrameError):
            continue
        total += 1
        for block, (lo, hi) in enumerate(_ANGLE_RANGES):
            b = int(_bin_index(np.array([angles[block]]), lo, hi, bins)[0])
            hist[block * bins + b] += 1.0
    if normalize and total:
        hist /= total
    return hist


def fpfh(
    mesh: Mesh,
    radius: float = 10.0,
    max_neighbors: int = 100,
    bins: int = DEFAULT_BINS,
    *,
    normalize: bool = True,
) -> FloatArray:
    """Fast Point Feature Histogram per vertex.

    ``FPFH(p) = SPFH(p) + (1/N) * sum_k SPFH(p_k) / |p_k - p|`` over the N
    radius neighbors of ``p``; distances are raw millimetres. Coincident
    neighbors count toward N but contribute no weighted term.
    """
    points = mesh.vertices
    normals = vertex_normals(mesh)
    index = radius_neighbors(points, radius, max_neighbors)
    own = spfh_matrix(points, normals, index, bins, normalize=normalize)

    n = len(index)
    counts = index.counts().astype(np.float64)
    queries = index.query_ids()
    dist = index.distances
    usable = dist > 0
    weights = np.zeros_like(dist)
    weights[usable] = 1.0 / (counts[queries[usable]] * dist[usable])
    mixing = sparse.csr_matrix((weights, (queries, index.indices)), shape=(n, n))
    return own + mixing @ own


def node_features(
    mesh: Mesh, mode: str, config: FeatureConfig | None = None
) -> FloatArray:
    """Node feature matrix for *mode* (``constant``, ``positional``, ``fpfh``).

    Positional features are the raw coordinates in mm, deliberately not
    centered. FPFH uses *config* (defaults: radius 10 mm, 100 neighbors,
    11 bins).
    """
    if mode == "constant":
        return np.ones((mesh.n_vertices, 1), dtype=np.float64)
    if mode == "positional":
        return mesh.vertices.copy()
    if mode == "fpfh":
        cfg = config or FeatureConfig()
        return fpfh(
            mesh,
            cfg.radius,
            cfg.max_neighbors,
            cfg.bins,
            normalize=cfg.normalize_spfh,
        )
    raise FeatureModeError(
        f"Unknown feature mode {mode!r}; expected one of {FEATURE_MODES}"
    )


def edge_attributes(points: FloatArray, edges: IndexArray) -> FloatArray:
    """Normalized spherical coordinates ``(r, theta, phi)`` of each edge.

    For edge ``i -> j`` the offset is ``p_j - p_i``; ``r`` is divided by the
    longest edge of this graph, the polar angle by pi and the azimuth is
    mapped from (-pi, pi] to [0, 1]. Zero-length edges emit ``(0, 0, 0)``.
    """
    if not len(edges):
        return np.empty((0, 3), dtype=np.float64)
    delta = points[edges[:, 1]] - points[edges[:, 0]]
    r = np.sqrt(np.sum(delta * delta, axis=1))
    nonzero = r > 0
    attrs = np.zeros((len(edges), 3), dtype=np.float64)
    r_max = float(r.max())
    if r_max > 0:
        attrs[:, 0] = r / r_max
    cos_polar = np.divide(delta[:, 2], r, out=np.zeros_like(r), where=nonzero)
    attrs[:, 1] = np.arccos(np.clip(cos_polar, -1.0, 1.0)) / np.pi
    azimuth = np.arctan2(delta[:, 1], delta[:, 0])
    azimuth = np.where(azimuth <= -np.pi, np.pi, azimuth)
    attrs[:, 2] = (azimuth + np.pi) / (2 * np.pi)
    attrs[~nonzero] = 0.0
    return np.clip(attrs, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Feature cache
# ---------------------------------------------------------------------------


class FeatureCache:
    """Per-mesh node-feature tables stored as ``.npz`` under *root*.

    The cache key hashes the mesh file bytes together with every feature
    parameter; a table is only reused for identical inputs.
    """

    def __init__(self, root: Path) -> None:
        """Store the cache directory (created lazily on first write)."""
        self._root = root

    @staticmethod
    def _header(config: FeatureConfig) -> dict[str, object]:
        return {
            "mode": config.mode,
            "radius": config.radius,
            "max_neighbors": config.max_neighbors,
            "bins": config.bins,
            "normalize_spfh": config.normalize_spfh,
        }

    def key(self, mesh_path: Path, config: FeatureConfig) -> str:
        """Return the cache key for *mesh_path* under *config*."""
        digest = hashlib.sha256(mesh_path.read_bytes())
        digest.update(json.dumps(self._header(config), sort_keys=True).encode())
        return digest.hexdigest()

    def path_for(self, mesh_path: Path, config: FeatureConfig) -> Path:
        """Return the cache file location for *mesh_path*."""
        return self._root / f"{self.key(mesh_path, config)}.npz"

    def load(self, mesh_path: Path, config: FeatureConfig) -> FloatArray | None:
        """Return the cached table or ``None`` on a miss or header mismatch."""
        path = self.path_for(mesh_path, config)
        if not path.is_file():
            return None
        with np.load(path) as data:
            header = json.loads(str(data["header"]))
            table = np.asarray(data["features"], dtype=np.float64)
        if header != self._header(config):
            logger.warning(f"Заголовок кэша {path} не совпадает, пересчитываю")
            return None
        return table

    def store(self, mesh_path: Path, config: FeatureConfig, table: FloatArray) -> Path:
        """Write *table* for *mesh_path* and return the cache file path."""
        path = self.path_for(mesh_path, config)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez(
                fh,
                features=table,
                header=np.array(json.dumps(self._header(config), sort_keys=True)),
            )
        return path
