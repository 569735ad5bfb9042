"""Self-supervised training loop.

Each seed-taxonomy node with at least one parent becomes a training query:
its own edges are masked, its masked adjacency yields positive positions,
and negatives are sampled from the remaining candidates.  Five binary
cross-entropy terms (one per scorer) are combined with fixed weights and
minimized with Adam; the validation mean rank drives LR halving, early
stopping and best-checkpoint selection.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .matcher import ModelParams, PathCache, init_model, score_backward, score_position
from .nn.adam import AdamState, adam_step
from .nn.ops import bce_with_logits
from .sentences import DEFAULT_MAX_PATHS
from .taxonomy import PSEUDO_LEAF, Position, QuerySet, Taxonomy, TaxonomyError


@dataclass(frozen=True)
class TrainingExample:
    query: str
    position: Position
    labels: tuple[int, int, int, int, int]  # (y1, y2, y3, y4, yp)


@dataclass
class TrainConfig:
    lr: float = 0.001
    scheduler_factor: float = 0.5
    scheduler_patience: int = 10
    max_epochs: int = 200
    early_stop_patience: int = 10
    batch_size: int = 16
    negatives: int = 31
    lambdas: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 0.2)
    t_train: int = 5
    t_eval: int = 20
    seed: int = 0
    variant: str = "full"
    k: int = 10
    h: int = 500
    max_paths: int = DEFAULT_MAX_PATHS
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("lr", "scheduler_factor", "batch_size", "t_train",
                     "t_eval", "k", "h"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def generate_examples(seed_tax: Taxonomy, query: str, negatives: int,
                      rng: np.random.Generator) -> list[TrainingExample]:
    """Positives from the query's masked adjacency plus sampled negatives.

    Fine-grained labels: y1/y3 flag a correct parent side, y2 a correct
    child side (pseudo leaf counts when the query is a leaf), y4 = yp flag
    the exact position.
    """
    parents, children = seed_tax.neighbors(query)
    if not parents:
        raise TaxonomyError(f"query {query!r} has no parent")
    if children:
        positives = {Position(p, c) for p in parents for c in children}
    else:
        positives = {Position(p, PSEUDO_LEAF) for p in parents}

    pool = [Position(p, c) for p, c in seed_tax.edges if query not in (p, c)]
    pool += [Position(n, PSEUDO_LEAF) for n in seed_tax.nodes if n != query]
    pool = sorted((pos for pos in pool if pos not in positives),
                  key=lambda pos: pos.sort_key)
    n_neg = min(negatives, len(pool))
    chosen = [pool[i] for i in rng.choice(len(pool), size=n_neg, replace=False)]

    def label(pos: Position) -> tuple[int, int, int, int, int]:
        y1 = int(pos.parent in parents)
        y2 = int(pos.child in children
                 or (pos.child is PSEUDO_LEAF and not children))
        y_pos = int(pos in positives)
        return (y1, y2, y1, y_pos, y_pos)

    examples = [TrainingExample(query, pos, label(pos))
                for pos in sorted(positives, key=lambda pos: pos.sort_key)]
    examples += [TrainingExample(query, pos, label(pos)) for pos in chosen]
    return examples


def example_loss(model: ModelParams, table: EmbeddingTable, tax: Taxonomy,
                 ex: TrainingExample, cfg: TrainConfig, rng=None,
                 path_cache: PathCache | None = None):
    """Weighted multi-scorer BCE loss and its gradients for one example.

    Returns (total loss, grads, per-term losses).  The sibling scorer's
    term is dropped in the no-sibling variant.
    """
    e_q = table.lookup(ex.query, model.dtype)
    bundle, tape = score_position(model, e_q, tax, table, ex.position,
                                  cfg.t_train, rng, path_cache)
    y1, y2, y3, y4, yp = ex.labels
    lam1, lam2, lam3, lam4 = cfg.lambdas
    terms = {}
    dscores = {}
    loss_p, grad_p = bce_with_logits(bundle.sp, yp)
    terms["sp"] = loss_p
    dscores["sp"] = grad_p
    pairs = [("s1", bundle.s1, y1, lam1), ("s2", bundle.s2, y2, lam2),
             ("s4", bundle.s4, y4, lam4)]
    if model.variant == "full":
        pairs.insert(2, ("s3", bundle.s3, y3, lam3))
    total = loss_p
    for name, logit, y, lam in pairs:
        loss_i, grad_i = bce_with_logits(logit, y)
        terms[name] = loss_i
        dscores[name] = lam * grad_i
        total += lam * loss_i
    if not np.isfinite(total):
        raise FloatingPointError(f"non-finite loss on example {ex}")
    grads = score_backward(model, tape, dscores)
    return total, grads, terms


def _accumulate(into: dict, grads: dict, scale: float):
    for name, g in grads.items():
        if name in into:
            into[name] += scale * g
        else:
            into[name] = scale * np.asarray(g, dtype=np.float64)


def train(seed_tax: Taxonomy, table: EmbeddingTable, val_queries: QuerySet,
          cfg: TrainConfig, log_sink=None):
    """Train a model on the seed taxonomy; returns (best model, epoch log).

    Deterministic under cfg.seed in single-threaded mode: all sampling is
    driven by per-epoch generators derived from the seed.
    """
    from .evaluator import evaluate  # local import: evaluator also ranks

    dtype = np.dtype(cfg.dtype)
    model = init_model(table.dim, cfg.h, cfg.k, cfg.variant, cfg.seed, dtype)
    queries = sorted(n for n in seed_tax.nodes if seed_tax.parents(n))
    if not queries:
        raise TaxonomyError("no trainable queries: every node is a root")
    table.check_covers(queries)
    path_cache = PathCache(seed_tax, cfg.max_paths, cfg.seed)

    adam = AdamState(lr=cfg.lr)
    trainable = set(model.trainable_names())
    params = model.param_dict()
    best = model.copy()
    best_mr = np.inf
    bad_epochs = 0
    log: list[dict] = []

    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch]))
        examples: list[TrainingExample] = []
        for q in queries:
            examples.extend(generate_examples(seed_tax, q, cfg.negatives, rng))
        order = rng.permutation(len(examples))

        sums = {name: 0.0 for name in ("sp", "s1", "s2", "s3", "s4")}
        total_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[start:start + cfg.batch_size]]
            acc: dict[str, np.ndarray] = {}
            for ex in batch:
                loss, grads, terms = example_loss(model, table, seed_tax, ex,
                                                  cfg, rng, path_cache)
                total_loss += loss
                for name, val in terms.items():
                    sums[name] += val
                _accumulate(acc, grads, 1.0 / len(batch))
            acc = {n: g for n, g in acc.items() if n in trainable}
            adam_step(adam, params, acc)

        if val_queries is not None and len(val_queries) > 0:
            report = evaluate(model, val_queries, seed_tax, table,
                              mode="completion", ks=(10,), t_eval=cfg.t_eval,
                              seed=cfg.seed)
            val_mr, val_mrr = report.mr, report.mrr
        else:
            val_mr, val_mrr = float("nan"), float("nan")

        n = len(examples)
        record = {"epoch": epoch, "loss": total_loss / n,
                  "loss_sp": sums["sp"] / n, "loss_s1": sums["s1"] / n,
                  "loss_s2": sums["s2"] / n, "loss_s3": sums["s3"] / n,
                  "loss_s4": sums["s4"] / n,
                  "val_mr": val_mr, "val_mrr": val_mrr, "lr": adam.lr,
                  "seconds": time.perf_counter() - t0}
        log.append(record)
        if log_sink is not None:
            import json
            log_sink.write(json.dumps(record, sort_keys=True) + "\n")

        if val_mr < best_mr:
            best_mr = val_mr
            best = model.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs == cfg.scheduler_patience:
                adam.lr *= cfg.scheduler_factor
            if bad_epochs >= cfg.scheduler_patience + cfg.early_stop_patience:
                break

    if val_queries is None or len(val_queries) == 0 or not log:
        best = model
    return best, log
