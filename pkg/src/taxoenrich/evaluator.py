"""Ranking and metrics: MR, scaled MRR, Recall@k, Precision@k.

Every query is ranked against the full candidate list (competition
ranking: other true positions ahead of a true position count against it).
The scaled reciprocal rank of a true position at rank r is 1/ceil(r/10),
the bucketed convention; a plain 1/r alternative is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .matcher import ModelParams, PathCache, score_position, select_siblings
from .taxonomy import (PSEUDO_LEAF, Position, QuerySet, Taxonomy,
                       enumerate_candidate_positions)


@dataclass
class RankingResult:
    query: str
    ranked: list[tuple[Position, float]]
    true_ranks: list[int]  # 1-based, sorted ascending


@dataclass
class MetricsReport:
    mr: float
    mrr: float
    recall_at: dict[int, float]
    precision_at: dict[int, float]
    n_queries: int
    n_true_positions: int

    def lines(self) -> list[str]:
        out = [f"mr\t{self.mr!r}", f"mrr\t{self.mrr!r}"]
        for k in sorted(self.recall_at):
            out.append(f"recall@{k}\t{self.recall_at[k]!r}")
        for k in sorted(self.precision_at):
            out.append(f"precision@{k}\t{self.precision_at[k]!r}")
        out.append(f"n_queries\t{self.n_queries}")
        out.append(f"n_true_positions\t{self.n_true_positions}")
        return out


def rank_positions(model: ModelParams, e_q: np.ndarray, tax: Taxonomy,
                   table: EmbeddingTable, candidates: list[Position],
                   t_eval: int = 20, rng=None,
                   true_positions: frozenset | None = None,
                   query: str = "", path_cache: PathCache | None = None,
                   sibling_embs: dict | None = None,
                   enc_cache: dict | None = None) -> RankingResult:
    """Score all candidates with the primal logit and sort them.

    Sorting is by logit descending with canonical (parent, child) order as
    the tie-break, so the result is invariant to the input permutation.
    """
    if not candidates:
        raise ValueError("no candidate positions to rank")
    cache = path_cache or PathCache(tax)
    scored = []
    for pos in candidates:
        sib = None if sibling_embs is None else sibling_embs.get(pos)
        bundle, _ = score_position(model, e_q, tax, table, pos, t_eval,
                                   None, cache, sibling_embs=sib,
                                   enc_cache=enc_cache)
        scored.append((pos, bundle.sp))
    scored.sort(key=lambda item: (-item[1], item[0].sort_key))
    true_ranks = []
    if true_positions:
        true_ranks = sorted(i + 1 for i, (pos, _) in enumerate(scored)
                            if pos in true_positions)
    return RankingResult(query, scored, true_ranks)


def _all_ranks(results: list[RankingResult]) -> list[int]:
    if not results:
        raise ValueError("no ranking results")
    ranks = [r for res in results for r in res.true_ranks]
    if not ranks:
        raise ValueError("no true ranks in results")
    return ranks


def mean_rank(results: list[RankingResult]) -> float:
    """Flat average over all true ranks of all queries."""
    ranks = _all_ranks(results)
    return sum(ranks) / len(ranks)


def scaled_mrr(results: list[RankingResult], mode: str = "bucket") -> float:
    """Mean reciprocal rank, scaled by bucketing ranks in tens by default."""
    ranks = _all_ranks(results)
    if mode == "bucket":
        recips = [1.0 / math.ceil(r / 10) for r in ranks]
    elif mode == "plain":
        recips = [1.0 / r for r in ranks]
    else:
        raise ValueError(f"unknown mrr mode {mode!r}")
    return sum(recips) / len(ranks)


def recall_at_k(results: list[RankingResult], k: int) -> float:
    """Hits in the top k over the total number of true positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _all_ranks(results)
    return sum(1 for r in ranks if r <= k) / len(ranks)


def precision_at_k(results: list[RankingResult], k: int) -> float:
    """Hits in the top k over n_queries * k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _all_ranks(results)
    return sum(1 for r in ranks if r <= k) / (len(results) * k)


def evaluate(model: ModelParams, queries: QuerySet, tax: Taxonomy,
             table: EmbeddingTable, mode: str = "completion",
             ks=(1, 5, 10), t_eval: int = 20, seed: int = 0,
             mrr_mode: str = "bucket") -> MetricsReport:
    """Rank every query against the mode's candidate set and aggregate.

    Sibling subsets are sampled once per position (seeded) and shared
    across queries; position encodings are computed once per call.
    """
    if len(queries) == 0:
        raise ValueError("empty query set")
    candidates = enumerate_candidate_positions(tax, mode)
    candidate_set = set(candidates)
    rng = np.random.default_rng(seed)
    sibling_embs = None
    if model.variant == "full":
        sibling_embs = {pos: select_siblings(tax, table, pos.parent, pos.child,
                                             t_eval, rng, model.dtype)
                        for pos in candidates}
    path_cache = PathCache(tax)
    enc_cache: dict = {}
    results = []
    for query, true_pos in queries:
        if mode == "expansion":
            bad = [p for p in true_pos if p.child is not PSEUDO_LEAF]
            if bad:
                raise ValueError(
                    f"expansion mode but query {query!r} has non-leaf true "
                    f"positions {bad[:2]}")
        rankable = frozenset(p for p in true_pos if p in candidate_set)
        if not rankable:
            raise ValueError(
                f"query {query!r} has no true position in the candidate set")
        e_q = table.lookup(query, model.dtype)
        results.append(rank_positions(model, e_q, tax, table, candidates,
                                      t_eval, None, rankable, query,
                                      path_cache, sibling_embs, enc_cache))
    ranks = _all_ranks(results)
    return MetricsReport(
        mr=mean_rank(results),
        mrr=scaled_mrr(results, mrr_mode),
        recall_at={k: recall_at_k(results, k) for k in ks},
        precision_at={k: precision_at_k(results, k) for k in ks},
        n_queries=len(results),
        n_true_positions=len(ranks),
    )
