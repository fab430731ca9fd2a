"""Graph representation, edge/label list ingestion and directed -> undirected conversion.

Nodes are opaque string tokens in the source files and dense integer indices
everywhere else.  Indices are assigned in order of first appearance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed line in an edge or label file."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LabelError(ValueError):
    pass


class ContractViolation(ValueError):
    """An operation was called on a graph it does not support (e.g. wrong directedness)."""


@dataclass(frozen=True)
class IngestStats:
    lines: int = 0
    comments: int = 0
    duplicates: int = 0
    self_loops: int = 0


def _lines(text: str | Iterable[str]) -> Iterable[str]:
    if isinstance(text, str):
        return text.splitlines()
    return text


class Graph:
    """Immutable node-indexed sparse graph.

    Edges are kept sorted by (source, target).  Undirected edges are stored
    once with ``source < target``; the adjacency lists are symmetric.
    Adjacency is CSR: ``out_indptr``/``out_indices``/``out_weights`` (and the
    ``in_*`` counterparts for directed graphs), each neighbour list sorted.
    """

    def __init__(
        self,
        num_nodes: int,
        edges: np.ndarray | Sequence[tuple[int, int]],
        directed: bool,
        weights: np.ndarray | Sequence[float] | None = None,
        tokens: Sequence[str] | None = None,
        stats: IngestStats | None = None,
    ):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if weights is None:
            weights = np.ones(len(edges))
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) != len(edges):
            raise ValueError("weights and edges differ in length")
        if num_nodes < 0 or (len(edges) and (edges.min() < 0 or edges.max() >= num_nodes)):
            raise ValueError("edge endpoint outside [0, num_nodes)")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("edge weights must be positive and finite")

        if not directed:
            edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges, weights = edges[order], weights[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ValueError("duplicate edges")

        self.directed = bool(directed)
        self.num_nodes = int(num_nodes)
        self._edges = edges
        self._weights = weights
        self._edges.setflags(write=False)
        self._weights.setflags(write=False)
        if tokens is None:
            tokens = [str(i) for i in range(num_nodes)]
        if len(tokens) != num_nodes:
            raise ValueError("one token per node required")
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.token_index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.token_index) != num_nodes:
            raise ValueError("node tokens must be unique")
        self.stats = stats or IngestStats()

        src, dst, w = edges[:, 0], edges[:, 1], weights
        if not self.directed:
            src, dst, w = np.concatenate([src, dst]), np.concatenate([dst, src]), np.concatenate([w, w])
        self.out_indptr, self.out_indices, self.out_weights = _csr(num_nodes, src, dst, w)
        if self.directed:
            self.in_indptr, self.in_indices, self.in_weights = _csr(num_nodes, dst, src, w)
        else:
            self.in_indptr, self.in_indices, self.in_weights = (
                self.out_indptr, self.out_indices, self.out_weights)

    # -- basic accessors -------------------------------------------------
    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def weighted(self) -> bool:
        return bool(np.any(self._weights != 1.0))

    def neighbors(self, u: int) -> np.ndarray:
        """Out-neighbours of ``u`` (all neighbours when undirected), sorted."""
        return self.out_indices[self.out_indptr[u]:self.out_indptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[u]:self.in_indptr[u + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def adjacency(self):
        """Sparse (CSR) adjacency with ``A[u, v]`` = weight of u -> v."""
        import scipy.sparse as sp

        return sp.csr_matrix(
            (self.out_weights, self.out_indices, self.out_indptr),
            shape=(self.num_nodes, self.num_nodes))

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``i`` renamed to ``perm[i]`` (tokens follow their nodes)."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.num_nodes)):
            raise ValueError("perm must be a permutation of range(num_nodes)")
        tokens = [""] * self.num_nodes
        for old, new in enumerate(perm):
            tokens[new] = self.tokens[old]
        return Graph(self.num_nodes, perm[self._edges], self.directed, self._weights,
                     tokens=tokens)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.directed == other.directed
                and self.num_nodes == other.num_nodes
                and self.tokens == other.tokens
                and np.array_equal(self._edges, other._edges)
                and np.array_equal(self._weights, other._weights))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph({kind}, |V|={self.num_nodes}, |E|={self.num_edges})"


def _csr(n: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray):
    order = np.lexsort((dst, src))
    src, dst, w = src[order], dst[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(dst, dtype=np.int64), np.ascontiguousarray(w)


# -- ingestion -------------------------------------------------------------

def parse_edge_list(
    text: str | Iterable[str],
    directed: bool,
    accumulate_weights: bool = False,
) -> Graph:
    """Parse ``<src> <dst> [weight]`` lines into a :class:`Graph`.

    Blank lines and ``#`` comments are ignored.  Self-loops are dropped;
    repeated edges are dropped too unless ``accumulate_weights`` is set, in
    which case their weights are summed.  For undirected input ``a b`` and
    ``b a`` are the same edge.  Drop counts end up in ``Graph.stats``.
    """
    index: dict[str, int] = {}
    edge_w: dict[tuple[int, int], float] = {}
    lines = comments = dups = loops = 0

    for lineno, raw in enumerate(_lines(text), start=1):
        lines += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            comments += 1
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(lineno, f"expected 2 or 3 fields, got {len(parts)}")
        weight = 1.0
        if len(parts) == 3:
            try:
                weight = float(parts[2])
            except ValueError:
                raise ParseError(lineno, f"non-numeric weight {parts[2]!r}") from None
            if not math.isfinite(weight) or weight <= 0:
                raise ParseError(lineno, f"weight must be positive, got {parts[2]!r}")
        u = index.setdefault(parts[0], len(index))
        v = index.setdefault(parts[1], len(index))
        if u == v:
            loops += 1
            continue
        key = (u, v) if directed or u < v else (v, u)
        if key in edge_w:
            dups += 1
            if accumulate_weights:
                edge_w[key] += weight
            continue
        edge_w[key] = weight

    stats = IngestStats(lines=lines, comments=comments, duplicates=dups, self_loops=loops)
    if dups or loops:
        logger.info("edge list: dropped %d duplicate line(s) and %d self-loop(s)", dups, loops)
    tokens = list(index)
    edges = np.array(list(edge_w), dtype=np.int64).reshape(-1, 2)
    return Graph(len(tokens), edges, directed, np.fromiter(edge_w.values(), float, len(edge_w)),
                 tokens=tokens, stats=stats)


def read_edge_list(path, directed: bool, accumulate_weights: bool = False) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, directed, accumulate_weights)


def to_undirected(g: Graph) -> Graph:
    """Drop edge directions; reciprocal pairs collapse into one edge (max weight kept)."""
    if not g.directed:
        raise ContractViolation("to_undirected needs a directed graph")
    edges = np.sort(g.edges, axis=1)
    order = np.lexsort((-g.weights, edges[:, 1], edges[:, 0]))
    edges, weights = edges[order], g.weights[order]
    keep = np.ones(len(edges), dtype=bool)
    keep[1:] = np.any(edges[1:] != edges[:-1], axis=1)
    return Graph(g.num_nodes, edges[keep], False, weights[keep], tokens=g.tokens)


def canonicalize(g: Graph) -> Graph:
    """Re-index nodes in order of first appearance in the sorted edge listing.

    This is the fixed point of serialize -> parse; nodes without edges go last
    (they cannot be represented in an edge list).
    """
    seen: dict[int, int] = {}
    for u, v in g.edges:
        seen.setdefault(int(u), len(seen))
        seen.setdefault(int(v), len(seen))
    for u in range(g.num_nodes):
        seen.setdefault(u, len(seen))
    perm = [seen[u] for u in range(g.num_nodes)]
    out = g.relabel(perm)
    # relabelling can reorder edges, so a second pass may be needed
    return out if _is_canonical(out) else canonicalize(out)


def _is_canonical(g: Graph) -> bool:
    nxt = 0
    for u, v in g.edges:
        for x in (int(u), int(v)):
            if x > nxt:
                return False
            if x == nxt:
                nxt += 1
    return True


def serialize_edge_list(g: Graph) -> str:
    """Edge list sorted by (source index, target index); weights only if non-unit."""
    tok = g.tokens
    if g.weighted:
        rows = (f"{tok[u]} {tok[v]} {w!r}\n" for (u, v), w in zip(g.edges.tolist(), g.weights.tolist()))
    else:
        rows = (f"{tok[u]} {tok[v]}\n" for u, v in g.edges.tolist())
    return "".join(rows)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_edge_list(g))


# -- labels ----------------------------------------------------------------

@dataclass(frozen=True)
class LabelTable:
    """Single-label class assignment for every node of a graph."""

    labels: np.ndarray
    class_tokens: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_tokens)

    def __len__(self) -> int:
        return len(self.labels)


def _class_order(tokens: Iterable[str]) -> list[str]:
    tokens = set(tokens)
    try:
        return sorted(tokens, key=int)
    except ValueError:
        return sorted(tokens)


def parse_labels(text: str | Iterable[str], g: Graph) -> LabelTable:
    """Parse ``<node> <class>`` lines; every node of ``g`` must appear exactly once.

    Class ids are contiguous; integer class tokens keep their numeric order,
    others are sorted lexicographically.
    """
    assigned: dict[int, str] = {}
    for lineno, raw in enumerate(_lines(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 2 fields, got {len(parts)}")
        node, cls = parts
        if node not in g.token_index:
            raise LabelError(f"line {lineno}: unknown node {node!r}")
        u = g.token_index[node]
        if u in assigned:
            raise LabelError(f"line {lineno}: node {node!r} labeled twice")
        assigned[u] = cls
    missing = [g.tokens[u] for u in range(g.num_nodes) if u not in assigned]
    if missing:
        more = f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""
        raise LabelError(f"node {missing[0]!r} has no label{more}")
    classes = _class_order(assigned.values())
    cid = {c: i for i, c in enumerate(classes)}
    labels = np.array([cid[assigned[u]] for u in range(g.num_nodes)], dtype=np.int64)
    labels.setflags(write=False)
    return LabelTable(labels, tuple(classes))


def read_labels(path, g: Graph) -> LabelTable:
    with open(path, encoding="utf-8") as fh:
        return parse_labels(fh, g)


def serialize_labels(labels: LabelTable, g: Graph) -> str:
    return "".join(f"{g.tokens[u]} {labels.class_tokens[c]}\n" for u, c in enumerate(labels.labels.tolist()))
