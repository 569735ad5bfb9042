"""Reader/writer for the TXE1 binary embedding table.

This is the file contract shared with the taxonomy engine: magic ``TXE1``,
u32 dim, u64 row count, then per row u32 id-length, UTF-8 id bytes and
``dim`` little-endian float32 values. Rows are written sorted by id so the
output bytes are canonical.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TXE1"


class TableFormatError(ValueError):
    """Malformed or truncated TXE1 stream."""


def write_table(rows: dict[str, np.ndarray], dim: int, sink) -> None:
    sink.write(MAGIC)
    sink.write(struct.pack("<IQ", dim, len(rows)))
    for node in sorted(rows):
        vec = np.asarray(rows[node], dtype="<f4")
        if vec.shape != (dim,):
            raise ValueError(f"row {node!r} has shape {vec.shape}, "
                             f"expected ({dim},)")
        encoded = node.encode("utf-8")
        sink.write(struct.pack("<I", len(encoded)))
        sink.write(encoded)
        sink.write(vec.tobytes())


def load_table(source) -> tuple[dict[str, np.ndarray], int]:
    def take(n, what):
        data = source.read(n)
        if len(data) != n:
            raise TableFormatError(f"truncated stream while reading {what}")
        return data

    if take(4, "magic") != MAGIC:
        raise TableFormatError("bad magic; not a TXE1 embedding table")
    dim, count = struct.unpack("<IQ", take(12, "header"))
    rows: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack("<I", take(4, "id length"))
        node = take(id_len, "id bytes").decode("utf-8")
        if node in rows:
            raise TableFormatError(f"duplicate id {node!r}")
        rows[node] = np.frombuffer(take(4 * dim, f"row {node!r}"),
                                   dtype="<f4").copy()
    return rows, dim
