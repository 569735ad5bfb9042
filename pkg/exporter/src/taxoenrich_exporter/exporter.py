"""Encode pseudo sentences with a transformer and pool node embeddings.

Each corpus record names an anchor concept and the whitespace-token span
where its surface form appears. A sentence vector is the mean of the
last-layer hidden states over the anchor's tokens (``anchor`` pooling) or
over all non-special tokens (``mean`` pooling); a node's row is the mean of
its sentence vectors. Inference runs in eval mode so output is
deterministic for fixed model weights.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .txe import load_table, write_table

logger = logging.getLogger(__name__)

POOLING_MODES = ("anchor", "mean")


class ExporterError(ValueError):
    pass


@dataclass(frozen=True)
class SentenceRecord:
    anchor: str
    kind: str
    text: str
    span: tuple[int, int]  # whitespace-token range of the anchor name


@dataclass
class ExportJob:
    sentences: str
    model: str
    out: str
    pooling: str = "anchor"
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ExporterError(f"unknown pooling mode {self.pooling!r}")
        if self.batch_size < 1:
            raise ExporterError("batch size must be >= 1")


def read_corpus(source) -> list[SentenceRecord]:
    """Parse ``anchor<TAB>kind<TAB>text<TAB>lo:hi`` records."""
    records = []
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ExporterError(
                f"corpus line {lineno}: expected 4 tab-separated fields")
        anchor, kind, text, span = parts
        try:
            lo, hi = (int(v) for v in span.split(":"))
        except ValueError:
            raise ExporterError(f"corpus line {lineno}: bad span {span!r}")
        n_words = len(text.split())
        if not (0 <= lo < hi <= n_words):
            raise ExporterError(
                f"corpus line {lineno}: span {lo}:{hi} outside the "
                f"{n_words}-word sentence")
        records.append(SentenceRecord(anchor, kind, text, (lo, hi)))
    return records


def _load_model(name_or_path: str, device: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(name_or_path)
    model = AutoModel.from_pretrained(name_or_path)
    model.to(torch.device(device))
    model.eval()
    return tokenizer, model


def encode_sentences(records: list[SentenceRecord], tokenizer, model,
                     pooling: str = "anchor", batch_size: int = 16,
                     device: str = "cpu") -> list[np.ndarray | None]:
    """One vector per record, or None when the anchor span fell entirely
    outside the tokenizer's range (truncation)."""
    import torch

    vectors: list[np.ndarray | None] = [None] * len(records)
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            batch = records[start:start + batch_size]
            words = [r.text.split() for r in batch]
            enc = tokenizer(words, is_split_into_words=True, padding=True,
                            truncation=True, return_tensors="pt")
            inputs = {k: v.to(torch.device(device)) for k, v in enc.items()}
            hidden = model(**inputs).last_hidden_state.cpu().numpy()
            for i, rec in enumerate(batch):
                word_ids = enc.word_ids(i)
                if pooling == "anchor":
                    keep = [t for t, w in enumerate(word_ids)
                            if w is not None
                            and rec.span[0] <= w < rec.span[1]]
                else:
                    keep = [t for t, w in enumerate(word_ids)
                            if w is not None]
                if not keep:
                    logger.warning("anchor span of %r fell outside the "
                                   "tokenized range; sentence skipped",
                                   rec.text)
                    continue
                vectors[start + i] = hidden[i, keep].mean(axis=0)
    return vectors


def export_embeddings(job: ExportJob) -> int:
    """Write one averaged row per anchor node; returns the row count."""
    with open(job.sentences, encoding="utf-8") as fh:
        records = read_corpus(fh)
    if not records:
        raise ExporterError(f"empty sentence corpus: {job.sentences}")
    tokenizer, model = _load_model(job.model, job.device)
    vectors = encode_sentences(records, tokenizer, model, job.pooling,
                               job.batch_size, job.device)
    by_node: dict[str, list[np.ndarray]] = {}
    for rec, vec in zip(records, vectors):
        if vec is not None:
            by_node.setdefault(rec.anchor, []).append(vec)
    dropped = {r.anchor for r in records} - set(by_node)
    if dropped:
        raise ExporterError(
            f"{len(dropped)} nodes lost every sentence to truncation, "
            f"e.g. {sorted(dropped)[:3]}")
    dim = int(model.config.hidden_size)
    rows = {node: np.mean(vecs, axis=0, dtype=np.float64).astype(np.float32)
            for node, vecs in by_node.items()}
    with open(job.out, "wb") as fh:
        write_table(rows, dim, fh)
    return len(rows)


def export_query_embeddings(names: dict[str, str], job: ExportJob) -> int:
    """Append one row per query id, encoding its surface name alone.

    The whole name is the anchor, so both pooling modes agree here. Errors
    on an id already present in the output table.
    """
    if not names:
        raise ExporterError("empty query name mapping")
    existing: dict[str, np.ndarray] = {}
    if os.path.exists(job.out):
        with open(job.out, "rb") as fh:
            existing, _ = load_table(fh)
    duplicates = sorted(set(names) & set(existing))
    if duplicates:
        raise ExporterError(f"duplicate ids already in table: "
                            f"{duplicates[:3]}")
    tokenizer, model = _load_model(job.model, job.device)
    records = []
    for qid in sorted(names):
        name = names[qid]
        n_words = len(name.split())
        if n_words == 0:
            raise ExporterError(f"query {qid!r} has an empty name")
        records.append(SentenceRecord(qid, "query", name, (0, n_words)))
    vectors = encode_sentences(records, tokenizer, model, job.pooling,
                               job.batch_size, job.device)
    rows = dict(existing)
    for rec, vec in zip(records, vectors):
        if vec is None:
            raise ExporterError(f"query {rec.anchor!r} produced no tokens")
        rows[rec.anchor] = vec.astype(np.float32)
    dim = int(model.config.hidden_size)
    with open(job.out, "wb") as fh:
        write_table(rows, dim, fh)
    return len(records)
