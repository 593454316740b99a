"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

FD_EPSILON = 1e-5
MAX_COORDS = 256


def finite_difference_check(
    lossfn,
    theta: np.ndarray,
    epsilon: float = FD_EPSILON,
    max_coords: int = MAX_COORDS,
    seed: int = 0,
) -> float:
    """Max relative error between lossfn's gradient and central differences.

    ``lossfn(theta)`` must return an object with .value and .grad (a
    LossValue) or a (value, grad) tuple. Every coordinate is probed, or a
    seeded subsample of ``max_coords`` when theta is larger. Errors are
    measured relative to the largest gradient magnitude seen, so
    coordinates with near-zero gradients do not blow up the ratio.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)

    def evaluate(t):
        res = lossfn(t)
        if hasattr(res, "value"):
            return float(res.value), np.asarray(res.grad, dtype=np.float64).reshape(-1)
        value, grad = res
        return float(value), np.asarray(grad, dtype=np.float64).reshape(-1)

    _, analytic = evaluate(theta)
    if len(analytic) != len(theta):
        raise ValueError("gradient length does not match parameter length")

    coords = np.arange(len(theta))
    if len(theta) > max_coords:
        coords = np.sort(
            np.random.default_rng(seed).choice(len(theta), size=max_coords, replace=False)
        )

    fd = np.empty(len(coords))
    for j, i in enumerate(coords):
        bumped = theta.copy()
        bumped[i] = theta[i] + epsilon
        up, _ = evaluate(bumped)
        bumped[i] = theta[i] - epsilon
        down, _ = evaluate(bumped)
        fd[j] = (up - down) / (2.0 * epsilon)

    scale = max(np.abs(analytic).max(initial=0.0), np.abs(fd).max(initial=0.0), 1e-12)
    return float(np.abs(fd - analytic[coords]).max(initial=0.0) / scale)
