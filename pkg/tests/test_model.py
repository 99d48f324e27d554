"""Tests for the shared-submodel classifier, its loss and its gradients."""

from __future__ import annotations

from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np
import pytest

from meshgnn.config import ModelConfig
from meshgnn.exceptions import ConfigMismatchError, ShapeMismatchError
from meshgnn.graph import assemble_sample, batch, derive_rng
from meshgnn.mesh import Mesh
from meshgnn.nn.model import (
    backward,
    check_parameters,
    cross_entropy,
    init_parameters,
    loss_and_gradients,
    model_forward,
    parameter_shapes,
    predict_proba,
    structure_embeddings,
)
from tests.conftest import make_sample, tiny_model_config, tiny_params
from tests.fixtures.meshes import bumpy_sphere, octahedron, tetrahedron

if TYPE_CHECKING:
    from meshgnn.graph import Sample

CONV_KINDS = ["gcn", "graphconv", "spline"]


def _permuted(mesh: Mesh, perm: np.ndarray) -> Mesh:
    """Same mesh with vertex ``perm[i]`` stored at position ``i``."""
    inverse = np.argsort(perm)
    return Mesh.from_arrays(mesh.vertices[perm], inverse[mesh.faces])


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def test_parameter_shapes_for_spline() -> None:
    config = ModelConfig(conv_kind="spline", input_dim=33, n_structures=15)
    shapes = parameter_shapes(config)

    assert shapes["conv0.weight"] == (125, 33, 32)
    assert shapes["conv2.root_weight"] == (32, 32)
    assert shapes["fc_hidden.weight"] == (15 * 32, 32)
    assert shapes["fc_out.weight"] == (32, 2)


def test_init_is_seeded_with_zero_biases() -> None:
    config = tiny_model_config("gcn")
    a = init_parameters(config, np.random.default_rng(3))
    b = init_parameters(config, np.random.default_rng(3))

    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert not a["conv1.bias"].any()
    check_parameters(a, config)


def test_check_parameters_rejects_wrong_shape() -> None:
    config = tiny_model_config()
    params = init_parameters(config, np.random.default_rng(0))
    params["fc_out.bias"] = np.zeros(3)

    with pytest.raises(ShapeMismatchError, match="fc_out.bias"):
        check_parameters(params, config)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("conv", CONV_KINDS)
def test_zero_network_outputs_bias(conv: str, rng: np.random.Generator) -> None:
    config = tiny_model_config(conv)  # type: ignore[arg-type]
    params = {k: np.zeros_like(v) for k, v in tiny_params(config).items()}
    params["fc_out.bias"] = np.array([0.3, -0.2])

    logits = model_forward(params, config, batch([make_sample(rng), make_sample(rng)]))

    np.testing.assert_array_equal(logits, [[0.3, -0.2], [0.3, -0.2]])


@pytest.mark.parametrize("conv", CONV_KINDS)
def test_batching_is_transparent(conv: str, rng: np.random.Generator) -> None:
    config = tiny_model_config(conv)  # type: ignore[arg-type]
    params = tiny_params(config)
    samples = [make_sample(rng, sample_id=f"s{i}") for i in range(8)]

    alone = model_forward(params, config, batch([samples[3]]))
    together = model_forward(params, config, batch(samples))

    np.testing.assert_allclose(together[3], alone[0], atol=1e-9)


@pytest.mark.parametrize("conv", CONV_KINDS)
def test_node_order_does_not_matter(conv: str) -> None:
    config = tiny_model_config(conv)  # type: ignore[arg-type]
    params = tiny_params(config)

    def logits(ms: list[Mesh]) -> np.ndarray:
        sample = assemble_sample(ms, 0, {}, "positional", n_structures=2)
        return model_forward(params, config, batch([sample]))

    for trial in range(50):
        trial_rng = derive_rng(17, trial, 0)
        meshes = [bumpy_sphere(trial_rng, subdivisions=0, radius=3.0) for _ in "ab"]
        shuffled = [_permuted(m, trial_rng.permutation(m.n_vertices)) for m in meshes]

        np.testing.assert_allclose(logits(shuffled), logits(meshes), atol=1e-9)


@pytest.mark.parametrize("conv", ["gcn", "graphconv"])
def test_edge_attributes_ignored_without_spline(
    conv: str, rng: np.random.Generator
) -> None:
    config = tiny_model_config(conv)  # type: ignore[arg-type]
    params = tiny_params(config)
    b = batch([make_sample(rng), make_sample(rng)])
    scrambled = replace(
        b,
        structures=tuple(
            replace(sb, edge_attrs=rng.uniform(0, 1, size=sb.edge_attrs.shape))
            for sb in b.structures
        ),
    )

    np.testing.assert_array_equal(
        model_forward(params, config, scrambled), model_forward(params, config, b)
    )


def test_single_node_hand_evaluation() -> None:
    config = ModelConfig(
        conv_kind="graphconv", hidden=1, n_structures=1, input_dim=1, fc_hidden=1
    )
    one = np.ones((1, 1))
    params = {
        "conv0.root_weight": 1.5 * one, "conv0.weight": one, "conv0.bias": [-1.0],
        "conv1.root_weight": 0.5 * one, "conv1.weight": one, "conv1.bias": [0.0],
        "conv2.root_weight": -one, "conv2.weight": one, "conv2.bias": [2.0],
        "fc_hidden.weight": 3 * one, "fc_hidden.bias": [-1.0],
        "fc_out.weight": np.array([[1.0, -1.0]]), "fc_out.bias": [0.0, 0.5],
    }  # fmt: skip
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    point = Mesh.from_arrays([[0, 0, 0]], np.empty((0, 3)))
    sample = assemble_sample(
        [point], 0, {}, "constant", n_structures=1, features=[np.array([[2.0]])]
    )

    # conv: 2 -> 2 -> 1 -> 1, pool 1, fc_hidden 2, fc_out (2, -1.5)
    logits = model_forward(params, config, batch([sample]))

    np.testing.assert_allclose(logits, [[2.0, -1.5]])


def test_embeddings_and_probabilities(rng: np.random.Generator) -> None:
    config = tiny_model_config("spline")
    params = tiny_params(config)
    b = batch([make_sample(rng) for _ in range(3)])

    assert structure_embeddings(params, config, b).shape == (3, 2, 4)
    proba = predict_proba(params, config, b)
    np.testing.assert_allclose(proba.sum(axis=1), np.ones(3))


def test_structure_count_mismatch(rng: np.random.Generator) -> None:
    config = tiny_model_config(n_structures=3)
    params = tiny_params(config)
    with pytest.raises(ConfigMismatchError, match="n_structures"):
        model_forward(params, config, batch([make_sample(rng)]))


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------


def test_uniform_logits_loss() -> None:
    assert cross_entropy(np.zeros((1, 2)), np.array([0])) == pytest.approx(np.log(2))


def test_saturated_correct_loss() -> None:
    loss = cross_entropy(np.array([[100.0, 0.0]]), np.array([0]))
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_wrong_class_loss_is_softplus() -> None:
    loss = cross_entropy(np.array([[1.0, 2.0]]), np.array([0]))
    assert loss == pytest.approx(np.log1p(np.e))
    assert loss == pytest.approx(1.3133, abs=1e-4)


def test_saturated_batch_has_vanishing_gradients(rng: np.random.Generator) -> None:
    config = tiny_model_config()
    params = tiny_params(config)
    params["fc_out.bias"] = np.array([100.0, 0.0])
    b = batch([make_sample(rng) for _ in range(2)])

    grads = backward(params, config, b, np.array([0, 0]))

    for value in grads.values():
        assert np.abs(value).max() < 1e-20


def _feature_sample(
    rng: np.random.Generator, dim: int, label: int, sample_id: str
) -> Sample:
    """Tetrahedron plus octahedron, jittered, with random node features."""
    meshes = []
    for base in (tetrahedron(2.0), octahedron()):
        noise = rng.uniform(-0.2, 0.2, size=base.vertices.shape)
        meshes.append(base.with_vertices(base.vertices + noise))
    tables = [rng.normal(size=(m.n_vertices, dim)) for m in meshes]
    return assemble_sample(
        meshes, label, {}, "positional", n_structures=2, sample_id=sample_id,
        features=tables,
    )  # fmt: skip


@pytest.mark.parametrize("dim", [1, 3, 33])
@pytest.mark.parametrize("conv", CONV_KINDS)
def test_gradients_match_finite_differences(
    conv: str, dim: int, rng: np.random.Generator
) -> None:
    """Every entry of every parameter against a central difference."""
    config = tiny_model_config(conv, input_dim=dim)  # type: ignore[arg-type]
    params = tiny_params(config)
    b = batch([_feature_sample(rng, dim, i % 2, f"s{i}") for i in range(3)])
    _, grads = loss_and_gradients(params, config, b)
    h = 1e-5

    def loss() -> float:
        return cross_entropy(model_forward(params, config, b), b.labels)

    for name, value in params.items():
        flat = value.reshape(-1)
        analytic = grads[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up = loss()
            flat[i] = original - h
            down = loss()
            flat[i] = original
            numeric = (up - down) / (2 * h)
            assert analytic[i] == pytest.approx(numeric, rel=1e-4, abs=1e-9), (
                f"{name}[{i}]"
            )
