"""Synthetic multi-structure mesh datasets.

Every sample consists of ``n_structures`` deformed icospheres laid out along
the x axis. Class 1 carries a smooth radial bump on the first half of the
structures; optional random poses and global domain shifts produce
out-of-distribution test sets. All generator constants are written into the
manifest header so a dataset describes itself.
"""

from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING, Literal

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from meshgnn.mesh import Mesh, save_off
from meshgnn.pipeline.manifest import BASE_COLUMNS, Manifest, mesh_columns

if TYPE_CHECKING:
    from pathlib import Path

    from meshgnn.mesh import FloatArray

PoseMode = Literal["aligned", "random"]
DomainShift = Literal["none", "translate", "scale"]

POSE_MODES: tuple[PoseMode, ...] = ("aligned", "random")
DOMAIN_SHIFTS: tuple[DomainShift, ...] = ("none", "translate", "scale")

MANIFEST_NAME = "manifest.csv"
# Bump directions use a fixed stream, independent of the dataset seed.
_BUMP_SEED = 20_240_101


class SyntheticConfig(BaseModel):
    """Generator settings; lengths in millimetres."""

    model_config = ConfigDict(frozen=True)

    n_samples: int = Field(default=600, ge=4)
    n_structures: int = Field(default=4, ge=1)
    class_effect: float = Field(default=0.3, ge=0)
    pose_mode: PoseMode = "aligned"
    domain_shift: DomainShift = "none"
    seed: int = Field(default=0, ge=0)
    subdivisions: int = Field(default=2, ge=0)
    radius: float = Field(default=8.0, gt=0)
    spacing: float = Field(default=30.0, gt=0)
    scale_jitter: float = Field(default=0.05, ge=0, lt=1)
    noise: float = Field(default=0.05, ge=0)
    bump_width: float = Field(default=0.5, gt=0)
    max_translation: float = Field(default=50.0, ge=0)
    shift_offset: float = 100.0
    shift_scale: float = Field(default=1.1, gt=0)
    disease_rate: float = Field(default=0.3, ge=0, le=1)

    @property
    def n_bumped(self) -> int:
        """Structures that carry the class-1 bump."""
        return math.ceil(self.n_structures / 2)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = [
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
]  # fmt: skip
_ICOSAHEDRON_FACES = [
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
]  # fmt: skip


def _midpoint(
    verts: list[list[float]], cache: dict[tuple[int, int], int], a: int, b: int
) -> int:
    """Index of the projected midpoint of edge (a, b), appending it once."""
    key = (min(a, b), max(a, b))
    if key not in cache:
        mid = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0
        verts.append(list(mid / np.linalg.norm(mid)))
        cache[key] = len(verts) - 1
    return cache[key]


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> Mesh:
    """Icosahedron refined by midpoint subdivision, projected to the sphere.

    Faces are wound counter-clockwise seen from outside (outward normals).
    Subdivision 2 gives 162 vertices and 320 faces.
    """
    verts: list[list[float]] = [
        list(np.asarray(v, dtype=np.float64) / math.sqrt(1 + _PHI * _PHI))
        for v in _ICOSAHEDRON_VERTICES
    ]
    faces = [list(f) for f in _ICOSAHEDRON_FACES]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        refined: list[list[int]] = []
        for a, b, c in faces:
            ab = _midpoint(verts, cache, a, b)
            bc = _midpoint(verts, cache, b, c)
            ca = _midpoint(verts, cache, c, a)
            refined.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
        faces = refined

    vertices = np.asarray(verts, dtype=np.float64)
    tris = np.asarray(faces, dtype=np.int64)
    v = vertices[tris]
    normals = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    inward = np.sum(normals * v.mean(axis=1), axis=1) < 0
    tris[inward] = tris[inward][:, ::-1]
    return Mesh(vertices=vertices * radius, faces=tris)


def bump_directions(n_structures: int) -> FloatArray:
    """Fixed unit direction of the class-1 bump on each structure."""
    rng = np.random.default_rng(_BUMP_SEED)
    directions = rng.normal(size=(n_structures, 3))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def deform_structure(
    template: Mesh,
    config: SyntheticConfig,
    rng: np.random.Generator,
    bump: FloatArray | None,
) -> Mesh:
    """Anisotropic scale, radial noise and (for class 1) a Gaussian bump."""
    norms = np.linalg.norm(template.vertices, axis=1, keepdims=True)
    unit = template.vertices / norms
    radial = np.full(len(unit), config.radius)
    radial += rng.normal(scale=config.noise, size=len(unit)) if config.noise else 0.0
    if bump is not None:
        dist2 = np.sum((unit - bump) ** 2, axis=1)
        radial += config.class_effect * config.radius * np.exp(
            -dist2 / (2 * config.bump_width**2)
        )
    scale = rng.uniform(1 - config.scale_jitter, 1 + config.scale_jitter, size=3)
    return template.with_vertices(unit * radial[:, None] * scale)


def _structure_offsets(config: SyntheticConfig) -> FloatArray:
    n = config.n_structures
    offsets = np.zeros((n, 3))
    offsets[:, 0] = (np.arange(n) - (n - 1) / 2) * config.spacing
    return offsets


def generate_sample(
    config: SyntheticConfig, label: int, rng: np.random.Generator
) -> list[Mesh]:
    """Structure meshes of one sample, posed and domain-shifted."""
    template = icosphere(config.subdivisions, 1.0)
    bumps = bump_directions(config.n_structures)
    offsets = _structure_offsets(config)
    meshes: list[Mesh] = []
    for s in range(config.n_structures):
        bump = bumps[s] if label == 1 and s < config.n_bumped else None
        mesh = deform_structure(template, config, rng, bump)
        meshes.append(mesh.transformed(translation=offsets[s]))
    if config.pose_mode == "random":
        rotation = Rotation.random(random_state=rng).as_matrix()
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        translation = direction * rng.uniform(0, config.max_translation)
        meshes = [
            m.transformed(rotation=rotation, translation=translation) for m in meshes
        ]
    if config.domain_shift == "translate":
        shift = np.full(3, config.shift_offset)
        meshes = [m.transformed(translation=shift) for m in meshes]
    elif config.domain_shift == "scale":
        meshes = [m.transformed(scale=config.shift_scale) for m in meshes]
    return meshes


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


def gen_synthetic(config: SyntheticConfig, out_dir: Path) -> Path:
    """Write OFF meshes and ``manifest.csv`` under *out_dir*; return its path.

    Labels are balanced and shuffled; age, sex and group (CN/AD) are drawn
    independently of the label.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_samples
    labels = rng.permutation(np.arange(n) % 2)
    ages = rng.integers(18, 90, size=n)
    sexes = rng.choice(["F", "M"], size=n)
    groups = np.where(rng.random(size=n) < config.disease_rate, "AD", "CN")

    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[dict[str, object]] = []
    width = len(str(n - 1))
    for i in tqdm(range(n), desc="Generating samples", unit="sample", leave=False):
        sample_id = f"sub-{i:0{width}d}"
        meshes = generate_sample(config, int(labels[i]), rng)
        row: dict[str, object] = {
            "sample_id": sample_id,
            "label": int(labels[i]),
            "age": int(ages[i]),
            "sex": str(sexes[i]),
            "group": str(groups[i]),
        }
        for s, mesh in enumerate(meshes):
            rel = f"meshes/{sample_id}/structure_{s:02d}.off"
            save_off(mesh, out_dir / rel)
            row[f"mesh_{s}"] = rel
        rows.append(row)

    columns = [*BASE_COLUMNS, *mesh_columns(config.n_structures)]
    frame = pd.DataFrame(rows, columns=columns)
    header = {"generator": json.dumps(config.model_dump(mode="json"), sort_keys=True)}
    manifest = Manifest(frame=frame, root=out_dir, header=header)
    path = manifest.save(out_dir / MANIFEST_NAME)
    logger.info(
        f"Сгенерировано {n} образцов × {config.n_structures} структур в {out_dir} "
        f"(pose={config.pose_mode}, shift={config.domain_shift})"
    )
    return path
