"""Taxonomy DAG: loading, validation, candidate positions and dataset splits.

A taxonomy is an immutable DAG of concept nodes connected by is-a edges
(parent -> child).  Candidate insertion positions are <parent, child> pairs
where the child side may be a pseudo leaf (and, behind a config flag, the
parent side a pseudo root).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TaxonomyError",
    "PseudoNode",
    "PSEUDO_LEAF",
    "PSEUDO_ROOT",
    "Position",
    "Taxonomy",
    "QuerySet",
    "load_taxonomy",
    "enumerate_candidate_positions",
    "true_positions",
    "split_dataset",
]


class TaxonomyError(ValueError):
    """Invalid taxonomy content or an operation on missing nodes."""


class PseudoNode:
    """Placeholder endpoint for leaf/root insertion positions."""

    __slots__ = ("token",)

    def __init__(self, token: str):
        self.token = token

    def __repr__(self):
        return self.token

    def __reduce__(self):
        # keep the singletons unique across pickling
        return (_pseudo_by_token, (self.token,))


PSEUDO_LEAF = PseudoNode("<pseudo-leaf>")
PSEUDO_ROOT = PseudoNode("<pseudo-root>")


def _pseudo_by_token(token):
    return PSEUDO_LEAF if token == PSEUDO_LEAF.token else PSEUDO_ROOT


def _endpoint_key(endpoint) -> tuple[int, str]:
    # real ids sort among themselves; pseudo endpoints sort after them
    if isinstance(endpoint, PseudoNode):
        return (1, endpoint.token)
    return (0, endpoint)


@dataclass(frozen=True)
class Position:
    """A candidate <parent, child> insertion position.

    At most one side is a pseudo placeholder: the child may be PSEUDO_LEAF,
    the parent may be PSEUDO_ROOT.
    """

    parent: object
    child: object

    def __post_init__(self):
        if isinstance(self.parent, PseudoNode) and isinstance(self.child, PseudoNode):
            raise TaxonomyError("position cannot have two pseudo endpoints")
        if self.parent is PSEUDO_LEAF or self.child is PSEUDO_ROOT:
            raise TaxonomyError("pseudo leaf must be a child, pseudo root a parent")

    @property
    def sort_key(self) -> tuple:
        return (_endpoint_key(self.parent), _endpoint_key(self.child))

    def __repr__(self):
        return f"<{self.parent!r}, {self.child!r}>"


class Taxonomy:
    """Immutable DAG of concepts.  All mutating operations return new values."""

    def __init__(self, names: dict[str, str], edges: set[tuple[str, str]],
                 pseudo_root: str | None = None):
        self._names = dict(names)
        self._edges = set(edges)
        self.pseudo_root = pseudo_root
        self._parents: dict[str, set[str]] = {n: set() for n in self._names}
        self._children: dict[str, set[str]] = {n: set() for n in self._names}
        for p, c in self._edges:
            if p not in self._names:
                raise TaxonomyError(f"edge references unknown node {p!r}")
            if c not in self._names:
                raise TaxonomyError(f"edge references unknown node {c!r}")
            if p == c:
                raise TaxonomyError(f"self-loop on node {p!r}")
            self._parents[c].add(p)
            self._children[p].add(c)
        self._check_acyclic()

    def _check_acyclic(self):
        # Kahn's algorithm; anything left over sits on a cycle
        indeg = {n: len(ps) for n, ps in self._parents.items()}
        stack = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while stack:
            n = stack.pop()
            seen += 1
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        if seen != len(self._names):
            cyclic = sorted(n for n, d in indeg.items() if d > 0)
            raise TaxonomyError(f"cycle detected involving nodes {cyclic[:5]}")

    # -- read-only surface -------------------------------------------------

    @property
    def nodes(self) -> set[str]:
        return set(self._names)

    @property
    def edges(self) -> set[tuple[str, str]]:
        return set(self._edges)

    def __len__(self):
        return len(self._names)

    def __contains__(self, node):
        return node in self._names

    def name(self, node: str) -> str:
        self._require(node)
        return self._names[node]

    @property
    def names(self) -> dict[str, str]:
        return dict(self._names)

    def _require(self, node):
        if node not in self._names:
            raise TaxonomyError(f"unknown node {node!r}")

    def neighbors(self, node: str) -> tuple[set[str], set[str]]:
        """Exact (parents, children) adjacency of ``node``.

        The children of a candidate parent double as its sibling pool.
        """
        self._require(node)
        return set(self._parents[node]), set(self._children[node])

    def parents(self, node: str) -> set[str]:
        self._require(node)
        return set(self._parents[node])

    def children(self, node: str) -> set[str]:
        self._require(node)
        return set(self._children[node])

    def roots(self) -> set[str]:
        return {n for n in self._names if not self._parents[n]}

    def leaves(self) -> set[str]:
        return {n for n in self._names if not self._children[n]}

    def depth(self) -> int:
        """Longest root-to-leaf path length in edges."""
        order = self._topo_order()
        dist = {n: 0 for n in self._names}
        for n in order:
            for c in self._children[n]:
                dist[c] = max(dist[c], dist[n] + 1)
        return max(dist.values(), default=0)

    def _topo_order(self) -> list[str]:
        indeg = {n: len(ps) for n, ps in self._parents.items()}
        stack = sorted((n for n, d in indeg.items() if d == 0), reverse=True)
        order = []
        while stack:
            n = stack.pop()
            order.append(n)
            for c in sorted(self._children[n], reverse=True):
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        return order

    # -- derived taxonomies ------------------------------------------------

    def add_pseudo_root(self, name: str) -> "Taxonomy":
        """Attach a new root above every current in-degree-0 node."""
        if name in self._names:
            raise TaxonomyError(f"pseudo root name {name!r} already present")
        names = dict(self._names)
        names[name] = name
        edges = set(self._edges)
        for r in self.roots():
            edges.add((name, r))
        return Taxonomy(names, edges, pseudo_root=name)

    def remove_node(self, node: str) -> "Taxonomy":
        """Drop ``node``, reattaching every parent to every child."""
        self._require(node)
        names = {n: s for n, s in self._names.items() if n != node}
        edges = {(p, c) for p, c in self._edges if node not in (p, c)}
        for p in self._parents[node]:
            for c in self._children[node]:
                edges.add((p, c))
        return Taxonomy(names, edges, pseudo_root=self.pseudo_root)


@dataclass
class QuerySet:
    """Held-out query nodes with their ground-truth insertion positions."""

    entries: list[tuple[str, frozenset[Position]]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_taxonomy(terms_source, edges_source) -> Taxonomy:
    """Parse ``id<TAB>name`` term lines and ``parent<TAB>child`` edge lines."""
    names: dict[str, str] = {}
    for lineno, raw in enumerate(terms_source, 1):
        line = raw.rstrip("\n")
        if not line:
            continue
        try:
            node_id, name = line.split("\t", 1)
        except ValueError:
            raise TaxonomyError(f"terms line {lineno}: expected id<TAB>name") from None
        if node_id in names:
            raise TaxonomyError(f"duplicate node id {node_id!r}")
        names[node_id] = name
    edges: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(edges_source, 1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise TaxonomyError(f"edges line {lineno}: expected parent<TAB>child")
        edge = (parts[0], parts[1])
        if edge in edges:
            raise TaxonomyError(f"duplicate edge {edge!r}")
        edges.add(edge)
    return Taxonomy(names, edges)


def enumerate_candidate_positions(tax: Taxonomy, mode: str = "completion",
                                  include_root_slots: bool = False) -> list[Position]:
    """All insertion positions, in canonical (parent, child) order.

    completion: every existing edge plus a <n, pseudo-leaf> slot per node.
    expansion: leaf slots only.  Root slots <pseudo-root, n> are off by
    default; no experiment exercises them.
    """
    if len(tax) == 0:
        raise TaxonomyError("cannot enumerate positions of an empty taxonomy")
    if mode not in ("completion", "expansion"):
        raise ValueError(f"unknown mode {mode!r}")
    positions = [Position(n, PSEUDO_LEAF) for n in tax.nodes]
    if mode == "completion":
        positions.extend(Position(p, c) for p, c in tax.edges)
        if include_root_slots:
            positions.extend(Position(PSEUDO_ROOT, n) for n in tax.nodes)
    return sorted(positions, key=lambda pos: pos.sort_key)


def true_positions(full_tax: Taxonomy, query: str) -> frozenset[Position]:
    """Ground-truth positions of ``query`` against the full taxonomy."""
    parents, children = full_tax.neighbors(query)
    if not parents:
        raise TaxonomyError(f"root node {query!r} cannot be a query")
    positions = {Position(p, c) for p in parents for c in children}
    if not children:
        positions = {Position(p, PSEUDO_LEAF) for p in parents}
    return frozenset(positions)


def split_dataset(tax: Taxonomy, n_val: int, n_test: int,
                  seed: int) -> tuple[Taxonomy, QuerySet, QuerySet]:
    """Hold out ``n_val`` + ``n_test`` non-root nodes as query sets.

    Sampled nodes are removed one at a time; each removal reattaches the
    node's parents to its children so the seed taxonomy stays connected.
    Ground truth is computed against the pre-removal taxonomy.  Sampled
    nodes are kept mutually non-adjacent so every ground-truth endpoint
    survives into the seed taxonomy and stays rankable.
    """
    removable = sorted(n for n in tax.nodes if tax.parents(n))
    n_total = n_val + n_test
    if n_total >= len(tax) - 1 or n_total > len(removable):
        raise TaxonomyError(
            f"cannot hold out {n_total} of {len(removable)} removable nodes")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(removable))
    picked: list[str] = []
    blocked: set[str] = set()
    for i in order:
        node = removable[i]
        if node in blocked:
            continue
        picked.append(node)
        blocked.add(node)
        blocked |= tax.parents(node) | tax.children(node)
        if len(picked) == n_total:
            break
    if len(picked) < n_total:
        raise TaxonomyError(
            f"only {len(picked)} mutually non-adjacent removable nodes, "
            f"need {n_total}")
    val = QuerySet([(q, true_positions(tax, q)) for q in sorted(picked[:n_val])])
    test = QuerySet([(q, true_positions(tax, q)) for q in sorted(picked[n_val:])])
    seed_tax = tax
    for q in picked:
        seed_tax = seed_tax.remove_node(q)
    return seed_tax, val, test
