"""Central finite differences against analytic gradients."""

from __future__ import annotations

import numpy as np


def finite_diff_check(loss_and_grad_fn, params: dict[str, np.ndarray],
                      eps: float = 1e-5, floor: float = 1e-8) -> float:
    """Max relative error over every coordinate of every parameter.

    ``loss_and_grad_fn(params)`` must return ``(loss, grads)`` with grads a
    dict matching ``params``; it is re-invoked with perturbed copies for the
    numeric side.  Relative error uses denominator max(|a|, |n|, floor);
    raise the floor toward eps when the loss has coordinates whose true
    gradient is near zero, where central-difference roundoff dominates.
    """
    loss0, analytic = loss_and_grad_fn(params)
    if not np.isfinite(loss0):
        raise FloatingPointError(f"non-finite loss {loss0!r}")
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        a_grad = np.zeros_like(p) if name not in analytic else analytic[name]
        flat = p.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = loss_and_grad_fn(params)
            flat[idx] = orig - eps
            lm, _ = loss_and_grad_fn(params)
            flat[idx] = orig
            numeric = (lp - lm) / (2.0 * eps)
            a = float(a_grad.reshape(-1)[idx])
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
