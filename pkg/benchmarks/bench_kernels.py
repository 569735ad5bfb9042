"""Compare the compiled and pure-Python LSTM kernels.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times lstm_seq_forward / lstm_seq_backward over a grid of sequence lengths
and widths, reports per-call times and speedup, and cross-checks outputs.
"""

import argparse
import time

import numpy as np

from taxoenrich.nn import kernels


def _case(rng, steps, d_in, hidden, dtype):
    x = rng.standard_normal((steps, d_in)).astype(dtype)
    Wx = (rng.standard_normal((d_in, 4 * hidden)) * 0.3).astype(dtype)
    Wh = (rng.standard_normal((hidden, 4 * hidden)) * 0.3).astype(dtype)
    b = (rng.standard_normal(4 * hidden) * 0.1).astype(dtype)
    dh = rng.standard_normal(hidden).astype(dtype)
    return x, Wx, Wh, b, dh


def _time(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernel not built; run `pip install -e .` first")
        return

    rng = np.random.default_rng(0)
    grid = [(4, 64, 32), (16, 64, 32), (16, 128, 64), (64, 256, 128)]
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'steps':>6} {'d_in':>5} {'hidden':>6} {'pass':>8} "
          f"{'python':>12} {'cython':>12} {'speedup':>8}")
    for steps, d_in, hidden in grid:
        x, Wx, Wh, b, dh = _case(rng, steps, d_in, hidden, np.float32)
        fwd_py = _time(lambda: py.lstm_seq_forward(x, Wx, Wh, b), args.repeats)
        fwd_cy = _time(lambda: cy.lstm_seq_forward(x, Wx, Wh, b), args.repeats)
        out_py = py.lstm_seq_forward(x, Wx, Wh, b)
        out_cy = cy.lstm_seq_forward(x, Wx, Wh, b)
        for a, c in zip(out_py, out_cy):
            np.testing.assert_allclose(a, c, atol=1e-5)
        bwd_py = _time(lambda: py.lstm_seq_backward(x, Wx, Wh, *out_py, dh),
                       args.repeats)
        bwd_cy = _time(lambda: cy.lstm_seq_backward(x, Wx, Wh, *out_cy, dh),
                       args.repeats)
        for name, a, c in (("forward", fwd_py, fwd_cy),
                           ("backward", bwd_py, bwd_cy)):
            print(f"{steps:>6} {d_in:>5} {hidden:>6} {name:>8} "
                  f"{a * 1e6:>10.1f}us {c * 1e6:>10.1f}us {a / c:>7.2f}x")


if __name__ == "__main__":
    main()
