"""Single-layer unidirectional LSTM with an explicit backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .ops import uniform_init


@dataclass
class LstmParams:
    """Combined gate matrices; columns ordered [input, forget, cand, output]."""

    Wx: np.ndarray  # (d_in, 4h)
    Wh: np.ndarray  # (h, 4h)
    b: np.ndarray   # (4h,)

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[0]

    def named(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.Wx": self.Wx, f"{prefix}.Wh": self.Wh,
                f"{prefix}.b": self.b}


def init_lstm(d_in: int, hidden: int, rng: np.random.Generator,
              dtype=np.float32) -> LstmParams:
    return LstmParams(
        Wx=uniform_init(rng, (d_in, 4 * hidden), d_in, dtype),
        Wh=uniform_init(rng, (hidden, 4 * hidden), hidden, dtype),
        b=np.zeros(4 * hidden, dtype=dtype),
    )


def lstm_forward(params: LstmParams, inputs) -> tuple[np.ndarray, tuple]:
    """Run the recurrence from a zero state; empty input -> zero hidden."""
    hidden = params.hidden_dim
    xs = [np.asarray(v) for v in inputs]
    if not xs:
        dtype = params.Wx.dtype
        return np.zeros(hidden, dtype=dtype), None
    x = np.ascontiguousarray(np.stack(xs), dtype=params.Wx.dtype)
    if x.shape[1] != params.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != lstm d_in {params.input_dim}")
    i, f, g, o, c, h = kernels.lstm_seq_forward(x, params.Wx, params.Wh, params.b)
    return h[-1].copy(), (x, i, f, g, o, c, h)


def lstm_backward(params: LstmParams, tape, dh_last: np.ndarray
                  ) -> dict[str, np.ndarray]:
    """Gradients wrt Wx/Wh/b given the gradient at the final hidden state."""
    if tape is None:
        return {"Wx": np.zeros_like(params.Wx),
                "Wh": np.zeros_like(params.Wh),
                "b": np.zeros_like(params.b)}
    x, i, f, g, o, c, h = tape
    dh_last = np.ascontiguousarray(dh_last, dtype=params.Wx.dtype)
    dWx, dWh, db = kernels.lstm_seq_backward(x, params.Wx, params.Wh,
                                             i, f, g, o, c, h, dh_last)
    return {"Wx": dWx, "Wh": dWh, "b": db}
