"""Node centralities: degree, in/out-degree, PageRank, closeness, betweenness."""
from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import ContractViolation, Graph


class Measure(str, enum.Enum):
    DEGREE = "degree"
    IN_DEGREE = "indegree"
    OUT_DEGREE = "outdegree"
    PAGERANK = "pagerank"
    CLOSENESS = "closeness"
    BETWEENNESS = "betweenness"

    @property
    def integer_valued(self) -> bool:
        return self in (Measure.DEGREE, Measure.IN_DEGREE, Measure.OUT_DEGREE)


def measures_for(g: Graph) -> list[Measure]:
    """Degree for undirected graphs, in/out-degree for directed ones, plus the rest."""
    degs = [Measure.IN_DEGREE, Measure.OUT_DEGREE] if g.directed else [Measure.DEGREE]
    return degs + [Measure.PAGERANK, Measure.CLOSENESS, Measure.BETWEENNESS]


@dataclass(frozen=True)
class CentralityScores:
    measure: Measure
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"{self.measure.value}: scores must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PageRankParams:
    alpha: float = 0.85
    tolerance: float = 1e-12
    max_iterations: int = 200

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last L1 residual {residual:.3e})")
        self.residual = residual


class DegreeKind(str, enum.Enum):
    TOTAL = "total"
    IN = "in"
    OUT = "out"


def degree_scores(g: Graph, kind: DegreeKind | str = DegreeKind.TOTAL) -> CentralityScores:
    kind = DegreeKind(kind)
    if kind is DegreeKind.TOTAL:
        if g.directed:
            raise ContractViolation("total degree is defined for undirected graphs; use in/out")
        return CentralityScores(Measure.DEGREE, g.out_degree().astype(float))
    if not g.directed:
        raise ContractViolation(f"{kind.value}-degree needs a directed graph")
    if kind is DegreeKind.IN:
        return CentralityScores(Measure.IN_DEGREE, g.in_degree().astype(float))
    return CentralityScores(Measure.OUT_DEGREE, g.out_degree().astype(float))


def pagerank(g: Graph, params: PageRankParams | None = None) -> CentralityScores:
    """Power iteration on PR = (1-a)/N + a * sum_{v->u} PR(v)/outdeg(v).

    Rank held by dangling nodes is spread uniformly over all nodes each
    iteration so the vector keeps summing to one.  Edge weights are ignored.
    """
    params = params or PageRankParams()
    n = g.num_nodes
    if n < 1:
        raise ValueError("pagerank needs at least one node")
    alpha = params.alpha
    outdeg = g.out_degree().astype(np.float64)
    dangling = outdeg == 0
    inv_out = np.divide(1.0, outdeg, out=np.zeros(n), where=~dangling)
    # transposed unweighted transition: row u collects in-neighbours v
    src = np.repeat(np.arange(n), np.diff(g.out_indptr))
    import scipy.sparse as sp

    pt = sp.csr_matrix((inv_out[src], (g.out_indices, src)), shape=(n, n))

    x = np.full(n, 1.0 / n)
    residual = np.inf
    for it in range(1, params.max_iterations + 1):
        new = alpha * (pt @ x) + (alpha * x[dangling].sum() + (1.0 - alpha)) / n
        new /= new.sum()
        residual = float(np.abs(new - x).sum())
        x = new
        if residual < params.tolerance:
            return CentralityScores(Measure.PAGERANK, x,
                                    {"alpha": alpha, "iterations": it, "residual": residual})
    raise ConvergenceError(f"pagerank did not converge in {params.max_iterations} iterations", residual)


# -- shortest-path based measures ------------------------------------------

@numba.njit(cache=True)
def _closeness_block(indptr, indices, sources):
    n = len(indptr) - 1
    out = np.zeros(len(sources))
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for k in range(len(sources)):
        s = sources[k]
        dist[:] = -1
        dist[s] = 0
        head, tail = 0, 1
        queue[0] = s
        total = 0
        while head < tail:
            v = queue[head]
            head += 1
            total += dist[v]
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
        out[k] = 1.0 / total if total > 0 else 0.0
    return out


@numba.njit(cache=True)
def _brandes_block(indptr, indices, sources):
    # Brandes (2001): one BFS per source, dependencies accumulated in reverse BFS order
    n = len(indptr) - 1
    bc = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    for k in range(len(sources)):
        s = sources[k]
        dist[:] = -1
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        head, tail = 0, 1
        order[0] = s
        while head < tail:
            v = order[head]
            head += 1
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        for i in range(tail - 1, 0, -1):
            w = order[i]
            # unweighted: w precedes every successor exactly one level deeper
            for j in range(indptr[w], indptr[w + 1]):
                x = indices[j]
                if dist[x] == dist[w] + 1:
                    delta[w] += sigma[w] / sigma[x] * (1.0 + delta[x])
            bc[w] += delta[w]
    return bc


def _run_blocks(kernel, indptr, indices, n, block, workers):
    blocks = [np.arange(i, min(i + block, n), dtype=np.int64) for i in range(0, n, block)]
    if workers <= 1 or len(blocks) <= 1:
        return [kernel(indptr, indices, b) for b in blocks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(kernel, [indptr] * len(blocks), [indices] * len(blocks), blocks))


def closeness(g: Graph, workers: int = 1, block: int = 256) -> CentralityScores:
    """1 / (sum of hop distances to every node reachable from u).

    Unreachable targets are left out of the sum; a node that reaches nothing
    scores 0.  Distances follow edge direction on directed graphs.
    """
    parts = _run_blocks(_closeness_block, g.out_indptr, g.out_indices, g.num_nodes, block, workers)
    values = np.concatenate(parts) if parts else np.zeros(0)
    return CentralityScores(Measure.CLOSENESS, values, {"unreachable": "excluded"})


def betweenness(g: Graph, workers: int = 1, block: int = 256) -> CentralityScores:
    """Unnormalised shortest-path betweenness, endpoints excluded.

    Directed graphs sum over ordered (s, t) pairs.  Undirected graphs count
    each unordered pair {s, t} once (half the ordered-pair total).
    """
    parts = _run_blocks(_brandes_block, g.out_indptr, g.out_indices, g.num_nodes, block, workers)
    # fixed block boundaries + fixed summation order => independent of worker count
    values = np.zeros(g.num_nodes)
    for p in parts:
        values += p
    if not g.directed:
        values /= 2.0
    return CentralityScores(Measure.BETWEENNESS, values,
                            {"pairs": "ordered" if g.directed else "unordered"})


def compute(g: Graph, measure: Measure | str, pagerank_params: PageRankParams | None = None,
            workers: int = 1) -> CentralityScores:
    measure = Measure(measure)
    if measure is Measure.DEGREE:
        return degree_scores(g, DegreeKind.TOTAL)
    if measure is Measure.IN_DEGREE:
        return degree_scores(g, DegreeKind.IN)
    if measure is Measure.OUT_DEGREE:
        return degree_scores(g, DegreeKind.OUT)
    if measure is Measure.PAGERANK:
        return pagerank(g, pagerank_params)
    if measure is Measure.CLOSENESS:
        return closeness(g, workers=workers)
    return betweenness(g, workers=workers)


def format_scores(scores: CentralityScores, g: Graph) -> str:
    return "".join(f"{tok} {v:.17g}\n" for tok, v in zip(g.tokens, scores.values.tolist()))


def parse_scores(text: str, g: Graph, measure: Measure | str) -> CentralityScores:
    values = np.full(g.num_nodes, np.nan)
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        tok, val = line.split()
        values[g.token_index[tok]] = float(val)
    if np.any(np.isnan(values)):
        raise ValueError("score file does not cover every node")
    return CentralityScores(Measure(measure), values)
