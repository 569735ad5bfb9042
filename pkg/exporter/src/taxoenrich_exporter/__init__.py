"""Offline embedding exporter: runs a pretrained language model over a
pseudo-sentence corpus and writes the binary embedding table the taxonomy
engine consumes."""

from .exporter import (ExportJob, ExporterError, SentenceRecord,
                       encode_sentences, export_embeddings,
                       export_query_embeddings, read_corpus)
from .txe import load_table, write_table

__version__ = "0.1.0"

__all__ = [
    "ExportJob", "ExporterError", "SentenceRecord", "encode_sentences",
    "export_embeddings", "export_query_embeddings", "read_corpus",
    "load_table", "write_table",
]
