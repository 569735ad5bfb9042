"""Command-line surface for the whole pipeline.

Subcommands: build, sentences, embed-fallback, import-embeddings, split,
train, eval, predict.  All take ``-c CONFIG``; every random choice funnels
through the config seed.  Exit codes: 0 success, 1 runtime failure
(one-line diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys

import numpy as np

from . import embeddings as emb
from . import evaluator, sentences, trainer
from .config import RunConfig, load_config
from .matcher import PathCache, model_from_tensors
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .taxonomy import (PSEUDO_LEAF, Position, PseudoNode, QuerySet, Taxonomy,
                       enumerate_candidate_positions, load_taxonomy,
                       split_dataset)

PSEUDO_LEAF_TOKEN = PSEUDO_LEAF.token


def _load_tax(cfg: RunConfig, use_split: bool = False) -> Taxonomy:
    if use_split:
        split_dir = cfg.path("split_dir")
        terms = os.path.join(split_dir, "seed.terms")
        edges = os.path.join(split_dir, "seed.edges")
        if not os.path.exists(terms):
            raise FileNotFoundError(f"missing seed taxonomy: {terms} "
                                    f"(run `split` first)")
    else:
        terms = cfg.require_input("terms")
        edges = cfg.require_input("edges")
    with open(terms, encoding="utf-8") as t, open(edges, encoding="utf-8") as e:
        return load_taxonomy(t, e)


def _write_queryset(qs: QuerySet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query, positions in qs:
            for pos in sorted(positions, key=lambda p: p.sort_key):
                child = (PSEUDO_LEAF_TOKEN if pos.child is PSEUDO_LEAF
                         else pos.child)
                fh.write(f"{query}\t{pos.parent}\t{child}\n")


def _read_queryset(path: str) -> QuerySet:
    by_query: dict[str, set[Position]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            query, parent, child = line.split("\t")
            pos = Position(parent,
                           PSEUDO_LEAF if child == PSEUDO_LEAF_TOKEN else child)
            by_query.setdefault(query, set()).add(pos)
    return QuerySet([(q, frozenset(ps)) for q, ps in sorted(by_query.items())])


def _load_table(cfg: RunConfig) -> emb.EmbeddingTable:
    with open(cfg.require_input("embeddings"), "rb") as fh:
        return emb.load_table(fh)


def _load_model(cfg: RunConfig):
    path = cfg.path("checkpoint")
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing checkpoint file: {path}")
    with open(path, "rb") as fh:
        tensors, hyper = load_checkpoint(fh)
    return model_from_tensors(tensors, hyper)


def cmd_build(cfg: RunConfig, args) -> int:
    tax = _load_tax(cfg)
    sink = io.StringIO()
    n_sentences = sentences.emit_sentence_corpus(tax, sink, cfg.max_paths,
                                                 cfg.seed)
    print(f"nodes\t{len(tax)}")
    print(f"edges\t{len(tax.edges)}")
    print(f"roots\t{len(tax.roots())}")
    print(f"depth\t{tax.depth()}")
    print(f"sentences\t{n_sentences}")
    return 0


def cmd_sentences(cfg: RunConfig, args) -> int:
    tax = _load_tax(cfg)
    out = cfg.path("sentences")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        count = sentences.emit_sentence_corpus(tax, fh, cfg.max_paths, cfg.seed)
    print(f"wrote {count} sentences to {out}")
    return 0


def cmd_embed_fallback(cfg: RunConfig, args) -> int:
    tax = _load_tax(cfg)
    corpus_path = cfg.require_input("sentences")
    with open(corpus_path, encoding="utf-8") as fh:
        corpus = sentences.read_sentence_corpus(fh)
    table = emb.build_fallback_table(corpus, tax.names, cfg.dim, cfg.seed)
    out = cfg.path("embeddings")
    with open(out, "wb") as fh:
        emb.write_table(table, fh)
    print(f"wrote {len(table)} rows of dim {table.dim} to {out}")
    return 0


def cmd_import_embeddings(cfg: RunConfig, args) -> int:
    tax = _load_tax(cfg)
    table = _load_table(cfg)
    table.check_covers(tax.nodes)
    print(f"ok: {len(table)} rows, dim {table.dim}, "
          f"covers all {len(tax)} taxonomy nodes")
    return 0


def cmd_split(cfg: RunConfig, args) -> int:
    tax = _load_tax(cfg)
    seed_tax, val, test = split_dataset(tax, args.n_val, args.n_test, cfg.seed)
    split_dir = cfg.path("split_dir")
    os.makedirs(split_dir, exist_ok=True)
    with open(os.path.join(split_dir, "seed.terms"), "w",
              encoding="utf-8") as fh:
        for node in sorted(seed_tax.nodes):
            fh.write(f"{node}\t{seed_tax.name(node)}\n")
    with open(os.path.join(split_dir, "seed.edges"), "w",
              encoding="utf-8") as fh:
        for parent, child in sorted(seed_tax.edges):
            fh.write(f"{parent}\t{child}\n")
    _write_queryset(val, os.path.join(split_dir, "val.tsv"))
    _write_queryset(test, os.path.join(split_dir, "test.tsv"))
    print(f"seed taxonomy: {len(seed_tax)} nodes, {len(seed_tax.edges)} edges; "
          f"{len(val)} val and {len(test)} test queries in {split_dir}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    seed_tax = _load_tax(cfg, use_split=True)
    table = _load_table(cfg)
    val = _read_queryset(os.path.join(cfg.path("split_dir"), "val.tsv"))
    log_path = cfg.paths.get("trainlog")
    log_sink = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        model, log = trainer.train(seed_tax, table, val, cfg.train, log_sink)
    finally:
        if log_sink is not None:
            log_sink.close()
    with open(cfg.path("checkpoint"), "wb") as fh:
        save_checkpoint(fh, model.param_dict(), model.hyperparams())
    final = log[-1] if log else {}
    print(f"trained {len(log)} epochs; best val MR "
          f"{min((r['val_mr'] for r in log), default=float('nan'))}; "
          f"checkpoint -> {cfg.path('checkpoint')}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    seed_tax = _load_tax(cfg, use_split=True)
    table = _load_table(cfg)
    model = _load_model(cfg)
    which = "test.tsv" if args.queries == "test" else "val.tsv"
    qs = _read_queryset(os.path.join(cfg.path("split_dir"), which))
    report = evaluator.evaluate(model, qs, seed_tax, table, mode=cfg.mode,
                                ks=cfg.ks, t_eval=cfg.train.t_eval,
                                seed=cfg.seed, mrr_mode=cfg.mrr_mode)
    lines = report.lines()
    lines.append(f"mode\t{cfg.mode}")
    lines.append(f"variant\t{model.variant}")
    lines.append(f"seed\t{cfg.seed}")
    text = "\n".join(lines) + "\n"
    report_path = cfg.paths.get("report")
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    seed_tax = _load_tax(cfg, use_split=os.path.exists(
        os.path.join(cfg.paths.get("split_dir", ""), "seed.terms")))
    table = _load_table(cfg)
    model = _load_model(cfg)
    query = args.query
    if query in table:
        e_q = table.lookup(query, model.dtype)
    else:
        # unseen concept: embed its surface name with the fallback embedder
        e_q = emb.fallback_embed(query, table.dim, cfg.seed).astype(model.dtype)
    candidates = enumerate_candidate_positions(seed_tax, cfg.mode)
    rng = np.random.default_rng(cfg.seed)
    from .matcher import select_siblings
    sibling_embs = None
    if model.variant == "full":
        sibling_embs = {pos: select_siblings(seed_tax, table, pos.parent,
                                             pos.child, cfg.train.t_eval, rng,
                                             model.dtype)
                        for pos in candidates}
    result = evaluator.rank_positions(model, e_q, seed_tax, table, candidates,
                                      cfg.train.t_eval, None, None, query,
                                      PathCache(seed_tax), sibling_embs, {})
    for pos, logit in result.ranked[:args.top_k or cfg.top_k]:
        p_name = (pos.parent.token if isinstance(pos.parent, PseudoNode)
                  else seed_tax.name(pos.parent))
        c_name = (PSEUDO_LEAF_TOKEN if pos.child is PSEUDO_LEAF
                  else seed_tax.name(pos.child))
        print(f"<{p_name}, {c_name}>\t{logit:.6f}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxoenrich",
        description="Taxonomy completion: rank <parent, child> insertion "
                    "positions for new concepts.")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("TAXOENRICH_THREADS", "1")),
                        help="worker threads (1 = deterministic mode)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=True,
                       help="path to the INI run config")
        p.set_defaults(fn=fn)
        return p

    add("build", cmd_build, "validate the taxonomy and print stats")
    add("sentences", cmd_sentences, "emit the pseudo-sentence corpus")
    add("embed-fallback", cmd_embed_fallback,
        "build the deterministic fallback embedding table")
    add("import-embeddings", cmd_import_embeddings,
        "validate an exporter-written TXE1 table against the taxonomy")
    p = add("split", cmd_split, "hold out validation/test query nodes")
    p.add_argument("--n-val", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    add("train", cmd_train, "train the matching model on the seed taxonomy")
    p = add("eval", cmd_eval, "rank held-out queries and report metrics")
    p.add_argument("--queries", choices=("val", "test"), default="test")
    p = add("predict", cmd_predict, "rank top positions for one concept")
    p.add_argument("query")
    p.add_argument("--top-k", type=int, default=None)
    return parser


def run(argv: list[str]) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        return args.fn(cfg, args)
    except Exception as exc:  # single-line diagnostic, exit 1
        print(f"taxoenrich: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
