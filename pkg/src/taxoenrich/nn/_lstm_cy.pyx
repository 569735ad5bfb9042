# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels; mirrors _lstm_py exactly."""

import numpy as np

cimport cython
from libc.math cimport exp, tanh

BACKEND = "cython"

ctypedef fused floating:
    float
    double


cdef inline floating _sig(floating x) noexcept nogil:
    if x >= 0:
        return <floating>(1.0 / (1.0 + exp(-x)))
    cdef floating e = <floating>exp(x)
    return <floating>(e / (1.0 + e))


@cython.boundscheck(False)
def lstm_seq_forward(floating[:, ::1] x, floating[:, ::1] Wx,
                     floating[:, ::1] Wh, floating[::1] b):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t d_in = x.shape[1]
    cdef Py_ssize_t hidden = Wh.shape[0]
    dtype = np.float32 if floating is float else np.float64
    i_np = np.empty((T, hidden), dtype)
    f_np = np.empty((T, hidden), dtype)
    g_np = np.empty((T, hidden), dtype)
    o_np = np.empty((T, hidden), dtype)
    c_np = np.empty((T, hidden), dtype)
    h_np = np.empty((T, hidden), dtype)
    z_np = np.empty(4 * hidden, dtype)
    cdef floating[:, ::1] i = i_np, f = f_np, g = g_np, o = o_np
    cdef floating[:, ::1] c = c_np, h = h_np
    cdef floating[::1] z = z_np
    cdef Py_ssize_t t, j, k
    cdef floating acc, cp, hp
    with nogil:
        for t in range(T):
            for j in range(4 * hidden):
                acc = b[j]
                for k in range(d_in):
                    acc += x[t, k] * Wx[k, j]
                if t > 0:
                    for k in range(hidden):
                        acc += h[t - 1, k] * Wh[k, j]
                z[j] = acc
            for j in range(hidden):
                i[t, j] = _sig(z[j])
                f[t, j] = _sig(z[hidden + j])
                g[t, j] = <floating>tanh(z[2 * hidden + j])
                o[t, j] = _sig(z[3 * hidden + j])
                cp = c[t - 1, j] if t > 0 else <floating>0.0
                c[t, j] = f[t, j] * cp + i[t, j] * g[t, j]
                h[t, j] = o[t, j] * <floating>tanh(c[t, j])
    return i_np, f_np, g_np, o_np, c_np, h_np


@cython.boundscheck(False)
def lstm_seq_backward(floating[:, ::1] x, floating[:, ::1] Wx,
                      floating[:, ::1] Wh,
                      floating[:, ::1] i, floating[:, ::1] f,
                      floating[:, ::1] g, floating[:, ::1] o,
                      floating[:, ::1] c, floating[:, ::1] h,
                      floating[::1] dh_last):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t d_in = x.shape[1]
    cdef Py_ssize_t hidden = Wh.shape[0]
    dtype = np.float32 if floating is float else np.float64
    dWx_np = np.zeros((d_in, 4 * hidden), dtype)
    dWh_np = np.zeros((hidden, 4 * hidden), dtype)
    db_np = np.zeros(4 * hidden, dtype)
    dh_np = np.array(dh_last, dtype=dtype, copy=True)
    dc_np = np.zeros(hidden, dtype)
    dz_np = np.empty(4 * hidden, dtype)
    cdef floating[:, ::1] dWx = dWx_np, dWh = dWh_np
    cdef floating[::1] db = db_np, dh = dh_np, dc = dc_np, dz = dz_np
    cdef Py_ssize_t t, j, k
    cdef floating tc, do_j, di_j, dg_j, df_j, cp, hp, acc
    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(hidden):
                tc = <floating>tanh(c[t, j])
                do_j = dh[j] * tc
                dc[j] = dc[j] + dh[j] * o[t, j] * (<floating>1.0 - tc * tc)
                di_j = dc[j] * g[t, j]
                dg_j = dc[j] * i[t, j]
                cp = c[t - 1, j] if t > 0 else <floating>0.0
                df_j = dc[j] * cp
                dz[j] = di_j * i[t, j] * (<floating>1.0 - i[t, j])
                dz[hidden + j] = df_j * f[t, j] * (<floating>1.0 - f[t, j])
                dz[2 * hidden + j] = dg_j * (<floating>1.0 - g[t, j] * g[t, j])
                dz[3 * hidden + j] = do_j * o[t, j] * (<floating>1.0 - o[t, j])
            for j in range(4 * hidden):
                db[j] += dz[j]
                for k in range(d_in):
                    dWx[k, j] += x[t, k] * dz[j]
                if t > 0:
                    for k in range(hidden):
                        dWh[k, j] += h[t - 1, k] * dz[j]
            for j in range(hidden):
                acc = <floating>0.0
                for k in range(4 * hidden):
                    acc += Wh[j, k] * dz[k]
                dh[j] = acc
                dc[j] = dc[j] * f[t, j]
    return dWx_np, dWh_np, db_np
