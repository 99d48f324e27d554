"""Tests for the Adam update."""

from __future__ import annotations

import numpy as np
import pytest

from meshgnn.exceptions import ShapeMismatchError
from meshgnn.nn.optim import AdamState, adam_step


def test_zero_gradient_leaves_params_unchanged() -> None:
    params = {"w": np.array([[1.0, -2.0]]), "b": np.array([0.5])}
    grads = {k: np.zeros_like(v) for k, v in params.items()}

    updated, state = adam_step(params, grads, AdamState.fresh(params))

    for name in params:
        np.testing.assert_array_equal(updated[name], params[name])
    assert state.t == 1


def test_first_step_moves_by_learning_rate() -> None:
    params = {"w": np.array([2.0])}

    updated, _ = adam_step(params, {"w": np.array([0.5])}, AdamState.fresh(params))

    assert updated["w"][0] - 2.0 == pytest.approx(-0.001, rel=1e-6)


def test_two_steps_follow_bias_corrected_moments() -> None:
    params = {"w": np.array([1.0])}
    state = AdamState.fresh(params)
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8

    expected, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate([0.5, -0.25], start=1):
        params, state = adam_step(params, {"w": np.array([g])}, state, lr=lr)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        expected -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

    assert params["w"][0] == pytest.approx(expected, rel=1e-12)
    assert state.t == 2
    assert state.m["w"][0] == pytest.approx(0.02)


def test_inputs_are_not_mutated() -> None:
    params = {"w": np.array([1.0, 2.0])}
    state = AdamState.fresh(params)

    adam_step(params, {"w": np.array([1.0, 1.0])}, state)

    np.testing.assert_array_equal(params["w"], [1.0, 2.0])
    assert state.t == 0
    assert not state.m["w"].any()


def test_gradient_shape_mismatch() -> None:
    params = {"w": np.zeros(3)}
    with pytest.raises(ShapeMismatchError, match="w"):
        adam_step(params, {"w": np.zeros(2)}, AdamState.fresh(params))
