"""Pure-numpy LSTM sequence kernels (fallback backend).

Gate layout along the last axis of Wx/Wh/b is [input, forget, candidate,
output].  Forward returns the per-step gate activations and states needed
by the backward pass; backward propagates only through the final hidden
state, which is all the encoders consume.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_seq_forward(x, Wx, Wh, b):
    """x: (T, d_in) -> (i, f, g, o, c, h) each (T, hidden)."""
    T = x.shape[0]
    hidden = Wh.shape[0]
    dtype = x.dtype
    i = np.empty((T, hidden), dtype)
    f = np.empty((T, hidden), dtype)
    g = np.empty((T, hidden), dtype)
    o = np.empty((T, hidden), dtype)
    c = np.empty((T, hidden), dtype)
    h = np.empty((T, hidden), dtype)
    h_prev = np.zeros(hidden, dtype)
    c_prev = np.zeros(hidden, dtype)
    for t in range(T):
        z = x[t] @ Wx + h_prev @ Wh + b
        i[t] = _sigmoid(z[:hidden])
        f[t] = _sigmoid(z[hidden:2 * hidden])
        g[t] = np.tanh(z[2 * hidden:3 * hidden])
        o[t] = _sigmoid(z[3 * hidden:])
        c[t] = f[t] * c_prev + i[t] * g[t]
        h[t] = o[t] * np.tanh(c[t])
        h_prev = h[t]
        c_prev = c[t]
    return i, f, g, o, c, h


def lstm_seq_backward(x, Wx, Wh, i, f, g, o, c, h, dh_last):
    """Gradient of a scalar loss wrt (Wx, Wh, b), given d(loss)/d(h[T-1])."""
    T, hidden = i.shape
    dtype = x.dtype
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * hidden, dtype)
    dh = dh_last.astype(dtype, copy=True)
    dc = np.zeros(hidden, dtype)
    for t in range(T - 1, -1, -1):
        tc = np.tanh(c[t])
        do = dh * tc
        dc = dc + dh * o[t] * (1.0 - tc * tc)
        di = dc * g[t]
        dg = dc * i[t]
        c_prev = c[t - 1] if t > 0 else np.zeros(hidden, dtype)
        df = dc * c_prev
        dz = np.concatenate([di * i[t] * (1.0 - i[t]),
                             df * f[t] * (1.0 - f[t]),
                             dg * (1.0 - g[t] * g[t]),
                             do * o[t] * (1.0 - o[t])])
        dWx += np.outer(x[t], dz)
        h_prev = h[t - 1] if t > 0 else np.zeros(hidden, dtype)
        dWh += np.outer(h_prev, dz)
        db += dz
        dh = Wh @ dz
        dc = dc * f[t]
    return dWx, dWh, db
