"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from meshgnn.exceptions import ShapeMismatchError

if TYPE_CHECKING:
    from meshgnn.nn.model import ModelParameters


@dataclass(frozen=True, slots=True)
class AdamState:
    """First/second moment accumulators per parameter and the step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: ModelParameters) -> AdamState:
        """Zero accumulators matching *params*, ``t = 0``."""
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(  # noqa: PLR0913
    params: ModelParameters,
    grads: ModelParameters,
    state: AdamState,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParameters, AdamState]:
    """Return updated parameters and state; inputs are left untouched."""
    t = state.t + 1
    new_params: ModelParameters = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatchError(
                f"{name}: gradient/state shape does not match {p.shape}"
            )
        m = beta1 * state.m[name] + (1 - beta1) * g
        v = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)
