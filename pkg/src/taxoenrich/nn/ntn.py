"""Neural Tensor Network scoring block.

score(u, v) = w . tanh(h(u, v)) with
h(u, v) = u^T W^[1:k] v + V [u; v] + b, h in R^k.

The pre-output activation tanh(h) is exposed because the primal scorer
consumes it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import uniform_init


@dataclass
class NtnParams:
    W: np.ndarray  # (d_u, d_v, k) bilinear tensor
    V: np.ndarray  # (k, d_u + d_v)
    b: np.ndarray  # (k,)
    w: np.ndarray  # (k,) output weights

    @property
    def k(self) -> int:
        return self.b.shape[0]

    @property
    def d_u(self) -> int:
        return self.W.shape[0]

    @property
    def d_v(self) -> int:
        return self.W.shape[1]

    def named(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.W": self.W, f"{prefix}.V": self.V,
                f"{prefix}.b": self.b, f"{prefix}.w": self.w}


def init_ntn(d_u: int, d_v: int, k: int, rng: np.random.Generator,
             dtype=np.float32) -> NtnParams:
    if k < 1:
        raise ValueError("slice count k must be >= 1")
    return NtnParams(
        W=uniform_init(rng, (d_u, d_v, k), d_u * d_v, dtype),
        V=uniform_init(rng, (k, d_u + d_v), d_u + d_v, dtype),
        b=np.zeros(k, dtype=dtype),
        w=uniform_init(rng, (k,), k, dtype),
    )


def ntn_forward(params: NtnParams, u: np.ndarray, v: np.ndarray
                ) -> tuple[float, np.ndarray, tuple]:
    """Return (score, tanh(h), tape)."""
    if u.shape != (params.d_u,) or v.shape != (params.d_v,):
        raise ValueError(f"ntn expects dims ({params.d_u},), ({params.d_v},); "
                         f"got {u.shape}, {v.shape}")
    uv = np.concatenate([u, v])
    h = np.einsum("i,ijk,j->k", u, params.W, v) + params.V @ uv + params.b
    z = np.tanh(h)
    score = float(params.w @ z)
    return score, z, (u, v, uv, z)


def ntn_backward(params: NtnParams, tape, dscore: float,
                 dz_extra: np.ndarray | None = None):
    """Backward through the NTN.

    dscore is d(loss)/d(score); dz_extra is an optional extra gradient
    arriving at tanh(h), used by the primal scorer which reads the
    pre-output activation directly.  Returns (param grads, du, dv).
    """
    u, v, uv, z = tape
    dz = dscore * params.w
    if dz_extra is not None:
        dz = dz + dz_extra
    dh = dz * (1.0 - z * z)
    grads = {
        "W": np.einsum("i,j,k->ijk", u, v, dh),
        "V": np.outer(dh, uv),
        "b": dh.copy(),
        "w": dscore * z,
    }
    d_u = params.d_u
    du = np.einsum("ijk,j,k->i", params.W, v, dh) + params.V[:, :d_u].T @ dh
    dv = np.einsum("i,ijk,k->j", u, params.W, dh) + params.V[:, d_u:].T @ dh
    return grads, du, dv
