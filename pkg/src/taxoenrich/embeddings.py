"""Node/query embedding table with a bit-exact binary format.

Rows are float32 on disk and in the table; the engine widens them to its
working precision on lookup.  A deterministic hashing embedder stands in
for the language-model exporter so the whole pipeline runs LM-free.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .taxonomy import PseudoNode

MAGIC = b"TXE1"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingFormatError(ValueError):
    """Malformed or truncated TXE1 stream."""


@dataclass
class EmbeddingTable:
    """NodeId -> d-dimensional vector; immutable after construction."""

    dim: int
    rows: dict[str, np.ndarray] = field(default_factory=dict)
    provenance: str = "fallback"

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dim must be positive")
        for node, vec in self.rows.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"row {node!r} has shape {vec.shape}, "
                                 f"expected ({self.dim},)")
            self.rows[node] = np.asarray(vec, dtype=np.float32)

    def __contains__(self, node):
        return node in self.rows

    def __len__(self):
        return len(self.rows)

    def lookup(self, node, dtype=np.float32) -> np.ndarray:
        """Stored row for ``node``; pseudo endpoints get a zero row (the
        trainable placeholder rows live in the model parameters)."""
        if isinstance(node, PseudoNode):
            return np.zeros(self.dim, dtype=dtype)
        if node not in self.rows:
            raise KeyError(f"no embedding row for node {node!r}")
        return self.rows[node].astype(dtype, copy=False)

    def check_covers(self, nodes) -> None:
        missing = sorted(n for n in nodes if n not in self.rows)
        if missing:
            raise KeyError(f"embedding table is missing {len(missing)} nodes, "
                           f"e.g. {missing[:3]}")


def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"),
                             digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def fallback_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic text embedding: hashed token vectors, averaged and
    L2-normalized."""
    if dim <= 0:
        raise ValueError("embedding dim must be positive")
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise ValueError(f"no tokens in text {text!r}")
    acc = np.zeros(dim)
    for t in tokens:
        acc += _token_vector(t, dim, seed)
    norm = np.linalg.norm(acc)
    if norm == 0.0:
        raise ValueError(f"degenerate token combination in {text!r}")
    return (acc / norm).astype(np.float32)


def build_fallback_table(sentences, names: dict[str, str], dim: int,
                         seed: int = 0) -> EmbeddingTable:
    """Average the fallback embedding of each node's sentences, renormalized.

    Nodes without sentences (isolated nodes, held-out queries) fall back to
    their surface name.
    """
    by_node: dict[str, list[str]] = {}
    for s in sentences:
        by_node.setdefault(s.anchor, []).append(s.text)
    if not by_node and not names:
        raise ValueError("no sentences and no names to embed")
    rows = {}
    for node, name in names.items():
        texts = by_node.get(node) or [name]
        acc = np.zeros(dim)
        for text in texts:
            acc += fallback_embed(text, dim, seed).astype(np.float64)
        acc /= len(texts)
        norm = np.linalg.norm(acc)
        if norm == 0.0:
            raise ValueError(f"degenerate embedding for node {node!r}")
        rows[node] = (acc / norm).astype(np.float32)
    return EmbeddingTable(dim, rows, provenance="fallback")


def write_table(table: EmbeddingTable, sink) -> None:
    """Binary layout: magic, u32 dim, u64 rows, then per row
    u32 id-length, id bytes, dim little-endian float32."""
    sink.write(MAGIC)
    sink.write(struct.pack("<IQ", table.dim, len(table.rows)))
    for node in sorted(table.rows):
        encoded = node.encode("utf-8")
        sink.write(struct.pack("<I", len(encoded)))
        sink.write(encoded)
        sink.write(table.rows[node].astype("<f4").tobytes())


def load_table(source) -> EmbeddingTable:
    """Read and validate a TXE1 stream."""

    def take(n, what):
        data = source.read(n)
        if len(data) != n:
            raise EmbeddingFormatError(f"truncated stream while reading {what}")
        return data

    if take(4, "magic") != MAGIC:
        raise EmbeddingFormatError("bad magic; not a TXE1 embedding table")
    dim, count = struct.unpack("<IQ", take(12, "header"))
    if dim == 0:
        raise EmbeddingFormatError("embedding dim 0 in header")
    rows: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack("<I", take(4, "id length"))
        node = take(id_len, "id bytes").decode("utf-8")
        if node in rows:
            raise EmbeddingFormatError(f"duplicate id {node!r}")
        vec = np.frombuffer(take(4 * dim, f"row {node!r}"), dtype="<f4")
        rows[node] = vec.astype(np.float32)
    return EmbeddingTable(dim, rows, provenance="exporter")
