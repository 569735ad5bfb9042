import numpy as np
import pytest

from taxoenrich.nn import kernels

try:
    CY = kernels.get_backend("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

PY = kernels.get_backend("python")

needs_cython = pytest.mark.skipif(not HAVE_CYTHON,
                                  reason="compiled kernel not built")


def _random_case(rng, steps, d_in, hidden, dtype):
    x = rng.standard_normal((steps, d_in)).astype(dtype)
    Wx = (rng.standard_normal((d_in, 4 * hidden)) * 0.3).astype(dtype)
    Wh = (rng.standard_normal((hidden, 4 * hidden)) * 0.3).astype(dtype)
    b = (rng.standard_normal(4 * hidden) * 0.1).astype(dtype)
    return x, Wx, Wh, b


class TestBackendSelection:
    def test_active_backend_reported(self):
        assert kernels.BACKEND in ("python", "cython")

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")

    @needs_cython
    def test_backend_labels(self):
        assert PY.BACKEND == "python"
        assert CY.BACKEND == "cython"


@needs_cython
class TestBackendAgreement:
    @pytest.mark.parametrize("dtype,fwd_tol,bwd_tol", [
        (np.float64, 1e-12, 1e-11),
        (np.float32, 1e-6, 1e-5),
    ])
    def test_forward_and_backward_agree(self, dtype, fwd_tol, bwd_tol):
        rng = np.random.default_rng(0)
        for _ in range(10):
            steps = int(rng.integers(1, 7))
            d_in = int(rng.integers(1, 9))
            hidden = int(rng.integers(1, 9))
            x, Wx, Wh, b = _random_case(rng, steps, d_in, hidden, dtype)
            out_py = PY.lstm_seq_forward(x, Wx, Wh, b)
            out_cy = CY.lstm_seq_forward(x, Wx, Wh, b)
            for a, c in zip(out_py, out_cy):
                np.testing.assert_allclose(a, c, atol=fwd_tol, rtol=0)
            dh = rng.standard_normal(hidden).astype(dtype)
            g_py = PY.lstm_seq_backward(x, Wx, Wh, *out_py, dh)
            g_cy = CY.lstm_seq_backward(x, Wx, Wh, *out_cy, dh)
            for a, c in zip(g_py, g_cy):
                np.testing.assert_allclose(a, c, atol=bwd_tol, rtol=0)

    def test_single_step_single_unit(self):
        rng = np.random.default_rng(1)
        x, Wx, Wh, b = _random_case(rng, 1, 1, 1, np.float64)
        out_py = PY.lstm_seq_forward(x, Wx, Wh, b)
        out_cy = CY.lstm_seq_forward(x, Wx, Wh, b)
        for a, c in zip(out_py, out_cy):
            np.testing.assert_allclose(a, c, atol=1e-14)
