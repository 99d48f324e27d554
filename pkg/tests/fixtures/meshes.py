"""Small hand-built meshes for unit tests."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from meshgnn.mesh import Mesh
from meshgnn.pipeline.synthetic import icosphere

OFF_TRIANGLE = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


def triangle() -> Mesh:
    """Unit right triangle in the z = 0 plane, counter-clockwise from +z."""
    return Mesh.from_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def two_triangles() -> Mesh:
    """Unit square split along its diagonal (5 undirected edges)."""
    return Mesh.from_arrays(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]]
    )


def tetrahedron(scale: float = 1.0) -> Mesh:
    """Regular-ish tetrahedron with outward winding."""
    verts = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    )
    faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return Mesh.from_arrays(verts * scale, faces)


def octahedron() -> Mesh:
    """Regular octahedron with outward winding."""
    verts = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    faces = [
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ]  # fmt: skip
    return Mesh.from_arrays(verts, faces)


def bumpy_sphere(
    rng: np.random.Generator, subdivisions: int = 1, radius: float = 8.0
) -> Mesh:
    """Icosphere with random radial noise, so no symmetry is left."""
    sphere = icosphere(subdivisions, 1.0)
    radial = radius * (1.0 + 0.1 * rng.uniform(-1, 1, size=sphere.n_vertices))
    return sphere.with_vertices(sphere.vertices * radial[:, None])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random 3x3 rotation matrix."""
    return Rotation.random(random_state=rng).as_matrix()
