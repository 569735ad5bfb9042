"""Taxonomy completion engine: structure-semantic position encoders, a
query-aware sibling encoder and a multi-scorer matching model, trained by
self-supervision on an existing taxonomy."""

from .taxonomy import (PSEUDO_LEAF, PSEUDO_ROOT, Position, QuerySet, Taxonomy,
                       TaxonomyError, enumerate_candidate_positions,
                       load_taxonomy, split_dataset, true_positions)

__version__ = "0.1.0"
