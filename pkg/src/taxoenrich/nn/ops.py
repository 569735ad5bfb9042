"""Scalar/vector primitives shared across the model."""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    x = np.asarray(x)
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def bce_with_logits(logit: float, label: int) -> tuple[float, float]:
    """Numerically stable binary cross-entropy on a raw logit.

    loss = softplus(logit) - label * logit, gradient = sigmoid(logit) - label.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    if not np.isfinite(logit):
        raise ValueError(f"non-finite logit {logit!r}")
    loss = float(np.logaddexp(0.0, logit) - label * logit)
    grad = float(sigmoid(np.asarray(logit, dtype=np.float64)) - label)
    return loss, grad


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...],
                 fan_in: int, dtype=np.float32) -> np.ndarray:
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), the default weight init."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
