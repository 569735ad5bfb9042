"""Backend selection for the hot LSTM kernels.

The compiled extension is preferred when importable; set
``TAXOENRICH_KERNELS=python`` or ``cython`` to force a backend.
"""

from __future__ import annotations

import os

from . import _lstm_py

_choice = os.environ.get("TAXOENRICH_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _lstm_py
else:
    try:
        from . import _lstm_cy as _impl
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _lstm_py

BACKEND: str = _impl.BACKEND
lstm_seq_forward = _impl.lstm_seq_forward
lstm_seq_backward = _impl.lstm_seq_backward


def get_backend(name: str):
    """Explicit backend lookup, used by tests and the benchmark."""
    if name == "python":
        return _lstm_py
    if name == "cython":
        from . import _lstm_cy
        return _lstm_cy
    raise ValueError(f"unknown kernel backend {name!r}")
