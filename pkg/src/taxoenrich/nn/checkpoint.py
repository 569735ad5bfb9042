"""Model checkpoint serialization (magic ``TXM1``), bit-exact round trip."""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"TXM1"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 4, np.dtype("<f8"): 8}
_CODE_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class CheckpointFormatError(ValueError):
    pass


def save_checkpoint(sink, tensors: dict[str, np.ndarray],
                    hyperparams: dict) -> None:
    """Write named tensors plus a JSON hyperparameter block."""
    sink.write(MAGIC)
    sink.write(struct.pack("<I", VERSION))
    blob = json.dumps(hyperparams, sort_keys=True).encode("utf-8")
    sink.write(struct.pack("<I", len(blob)))
    sink.write(blob)
    sink.write(struct.pack("<Q", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        code = _DTYPE_CODES.get(arr.dtype.newbyteorder("<"))
        if code is None:
            raise CheckpointFormatError(f"unsupported dtype {arr.dtype} "
                                        f"for tensor {name!r}")
        encoded = name.encode("utf-8")
        sink.write(struct.pack("<I", len(encoded)))
        sink.write(encoded)
        sink.write(struct.pack("<BI", code, arr.ndim))
        for dim in arr.shape:
            sink.write(struct.pack("<Q", dim))
        sink.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(source) -> tuple[dict[str, np.ndarray], dict]:
    def take(n, what):
        data = source.read(n)
        if len(data) != n:
            raise CheckpointFormatError(f"truncated stream reading {what}")
        return data

    if take(4, "magic") != MAGIC:
        raise CheckpointFormatError("bad magic; not a TXM1 checkpoint")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack("<I", take(4, "hyperparam length"))
    hyperparams = json.loads(take(blob_len, "hyperparams").decode("utf-8"))
    (count,) = struct.unpack("<Q", take(8, "tensor count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        if name in tensors:
            raise CheckpointFormatError(f"duplicate tensor {name!r}")
        code, ndim = struct.unpack("<BI", take(5, "tensor header"))
        if code not in _CODE_DTYPES:
            raise CheckpointFormatError(f"unknown dtype code {code}")
        shape = tuple(struct.unpack("<Q", take(8, "dim"))[0]
                      for _ in range(ndim))
        dtype = _CODE_DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        data = np.frombuffer(take(nbytes, f"tensor {name!r}"), dtype=dtype)
        tensors[name] = data.reshape(shape).copy()
    return tensors, hyperparams
