"""Command-line surface for the embedding exporter.

Exit codes: 0 success, 1 runtime failure (one-line diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportJob, export_embeddings, export_query_embeddings


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxoenrich-export",
        description="Encode a pseudo-sentence corpus with a pretrained "
                    "language model and write a TXE1 embedding table.")
    parser.add_argument("--sentences", required=True,
                        help="input sentence corpus (anchor/kind/text/span)")
    parser.add_argument("--model", required=True,
                        help="model name or local path for the encoder")
    parser.add_argument("--out", required=True,
                        help="output TXE1 embedding table")
    parser.add_argument("--pooling", choices=("anchor", "mean"),
                        default="anchor")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--queries",
                        help="optional id<TAB>name file; rows for these "
                             "queries are appended to the output table")
    return parser


def run(argv: list[str]) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    job = ExportJob(sentences=args.sentences, model=args.model, out=args.out,
                    pooling=args.pooling, batch_size=args.batch_size,
                    device=args.device)
    try:
        count = export_embeddings(job)
        print(f"wrote {count} node rows to {job.out}")
        if args.queries:
            names = {}
            with open(args.queries, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    qid, name = line.split("\t")
                    if qid in names:
                        raise ValueError(f"duplicate query id {qid!r}")
                    names[qid] = name
            appended = export_query_embeddings(names, job)
            print(f"appended {appended} query rows")
        return 0
    except Exception as exc:
        print(f"taxoenrich-export: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
