"""Path extraction and Hearst-pattern pseudo sentences.

Every concept is described by the root-to-node paths above it (ancestral)
and node-to-leaf paths below it (descendant), each rendered as a templated
sentence like ``"Electronic Devices, Smart Phone is a superclass of Disk"``.
These sentences feed both the embedding exporter and the fallback embedder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .taxonomy import Taxonomy, TaxonomyError

ANCESTRAL_TEMPLATES = {"superclass": "is a superclass of",
                       "ascendant": "is an ascendant of"}
DESCENDANT_TEMPLATES = {"subclass": "is a subclass of",
                        "descendant": "is a descendant of"}

# exhaustive enumeration above this cap switches to uniform seeded sampling
DEFAULT_MAX_PATHS = 32


@dataclass(frozen=True)
class TaxoPath:
    """A simple path describing ``anchor``, with the anchor itself stripped."""

    nodes: tuple[str, ...]
    kind: str  # "ancestral" | "descendant"
    anchor: str


@dataclass(frozen=True)
class PseudoSentence:
    anchor: str
    text: str
    anchor_span: tuple[int, int]  # whitespace-token range of the anchor name
    kind: str


def _paths_up(tax: Taxonomy, v: str) -> list[tuple[str, ...]]:
    # all root-to-parent(v) paths, root first, v excluded
    out: list[tuple[str, ...]] = []

    def walk(node, tail):
        parents = sorted(tax.parents(node))
        if not parents:
            if tail:
                out.append(tail)
            return
        for p in parents:
            walk(p, (p,) + tail)

    walk(v, ())
    return sorted(out)


def _paths_down(tax: Taxonomy, v: str) -> list[tuple[str, ...]]:
    # all child(v)-to-leaf paths, v excluded
    out: list[tuple[str, ...]] = []

    def walk(node, tail):
        children = sorted(tax.children(node))
        if not children:
            if tail:
                out.append(tail)
            return
        for c in children:
            walk(c, tail + (c,))

    walk(v, ())
    return sorted(out)


def _cap(paths: list[tuple[str, ...]], max_paths: int, rng_seed: int):
    if max_paths is not None and len(paths) > max_paths:
        rng = np.random.default_rng(rng_seed)
        idx = sorted(rng.choice(len(paths), size=max_paths, replace=False))
        paths = [paths[i] for i in idx]
    return paths


def ancestral_paths(tax: Taxonomy, v: str, max_paths: int = DEFAULT_MAX_PATHS,
                    rng_seed: int = 0) -> list[TaxoPath]:
    """Root-to-``v`` simple paths with ``v`` stripped (roots yield none)."""
    if v not in tax:
        raise TaxonomyError(f"unknown node {v!r}")
    paths = _cap(_paths_up(tax, v), max_paths, rng_seed)
    return [TaxoPath(p, "ancestral", v) for p in paths]


def descendant_paths(tax: Taxonomy, v: str, max_paths: int = DEFAULT_MAX_PATHS,
                     rng_seed: int = 0) -> list[TaxoPath]:
    """``v``-to-leaf simple paths with ``v`` stripped (leaves yield none)."""
    if v not in tax:
        raise TaxonomyError(f"unknown node {v!r}")
    paths = _cap(_paths_down(tax, v), max_paths, rng_seed)
    return [TaxoPath(p, "descendant", v) for p in paths]


def render_sentence(path: TaxoPath, names: dict[str, str],
                    template: str = None) -> PseudoSentence:
    """Render one path as a pseudo sentence; the anchor name comes last."""
    if template is None:
        template = "superclass" if path.kind == "ancestral" else "subclass"
    if path.kind == "ancestral":
        templates = ANCESTRAL_TEMPLATES
    else:
        templates = DESCENDANT_TEMPLATES
    if template not in templates:
        raise ValueError(
            f"template {template!r} does not fit a {path.kind} path")
    anchor_name = names[path.anchor]
    text = "{} {} {}".format(", ".join(names[n] for n in path.nodes),
                             templates[template], anchor_name)
    n_tokens = len(text.split())
    n_anchor = len(anchor_name.split())
    return PseudoSentence(path.anchor, text, (n_tokens - n_anchor, n_tokens),
                          path.kind)


def sample_path(paths: list[TaxoPath], rng: np.random.Generator) -> TaxoPath:
    """Uniform pick; callers substitute the empty path for empty lists."""
    if not paths:
        raise ValueError("cannot sample from an empty path list")
    return paths[int(rng.integers(len(paths)))]


def emit_sentence_corpus(tax: Taxonomy, sink, max_paths: int = DEFAULT_MAX_PATHS,
                         seed: int = 0, ancestral_template: str = "superclass",
                         descendant_template: str = "subclass") -> int:
    """Write one ``node<TAB>kind<TAB>text<TAB>span`` record per sentence.

    One template per path; per-node sampling seeds are derived from ``seed``
    so the corpus bytes are reproducible.
    """
    names = tax.names
    count = 0
    for i, node in enumerate(sorted(tax.nodes)):
        node_seed = seed * 1_000_003 + i
        paths = ancestral_paths(tax, node, max_paths, node_seed)
        paths += descendant_paths(tax, node, max_paths, node_seed + 1)
        for path in paths:
            template = (ancestral_template if path.kind == "ancestral"
                        else descendant_template)
            s = render_sentence(path, names, template)
            sink.write(f"{s.anchor}\t{s.kind}\t{s.text}\t"
                       f"{s.anchor_span[0]}:{s.anchor_span[1]}\n")
            count += 1
    return count


def read_sentence_corpus(source) -> list[PseudoSentence]:
    """Parse records produced by :func:`emit_sentence_corpus`."""
    sentences = []
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"sentence corpus line {lineno}: expected 4 fields")
        anchor, kind, text, span = parts
        lo, hi = span.split(":")
        sentences.append(PseudoSentence(anchor, text, (int(lo), int(hi)), kind))
    return sentences
