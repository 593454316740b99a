"""Adam with bias correction (functional: returns new state, mutates nothing)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, TrainingDiverged


@dataclass(frozen=True)
class AdamState:
    step: int
    m: np.ndarray  # first moment
    v: np.ndarray  # second moment

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(step=0, m=np.zeros(n), v=np.zeros(n))


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState, config):
    """One update: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)."""
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ContractViolation("parameter/gradient/state shapes differ")
    if not np.all(np.isfinite(grad)):
        raise TrainingDiverged("non-finite gradient", step=state.step + 1)
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new_theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new_theta, AdamState(step=t, m=m, v=v)
