"""node2vec: second-order biased random walks + skip-gram with negative sampling."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Iterator

import numba
import numpy as np

from ..alias import build_alias_table
from ..graph import Graph
from ..hashing import derive_seed
from ..rand import stream, uniform
from .base import EmbeddingMatrix, check_finite, init_vectors, noise_weights
from .sgns import update_pair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    negatives: int = 5
    dim: int = 128
    epochs: int = 1
    initial_rate: float = 0.025
    seed: int = 0
    workers: int = 1
    noise_exponent: float = 0.75

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 1 or self.window < 1 or self.walks_per_node < 1:
            raise ValueError("walk_length, window and walks_per_node must be >= 1")
        if self.dim < 1 or self.epochs < 1 or self.workers < 1 or self.negatives < 0:
            raise ValueError("invalid dim/epochs/workers/negatives")

    def as_dict(self) -> dict:
        return asdict(self)


# -- walks -----------------------------------------------------------------

@numba.njit(cache=True)
def _has_edge(indptr, indices, u, v):
    lo, hi = indptr[u], indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


@numba.njit(cache=True)
def _bias_weights(indptr, indices, weights, prev, cur, inv_p, inv_q, out):
    total = 0.0
    lo = indptr[cur]
    for j in range(lo, indptr[cur + 1]):
        x = indices[j]
        if x == prev:
            w = weights[j] * inv_p
        elif _has_edge(indptr, indices, prev, x):
            w = weights[j]
        else:
            w = weights[j] * inv_q
        out[j - lo] = w
        total += w
    return total


@numba.njit(cache=True)
def _pick(buf, n, total, state):
    r = uniform(state) * total
    acc = 0.0
    for k in range(n):
        acc += buf[k]
        if r < acc:
            return k
    # rounding: last positive entry
    for k in range(n - 1, -1, -1):
        if buf[k] > 0:
            return k
    return n - 1


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, weights, starts, rounds, seed, inv_p, inv_q, length, out, lengths):
    maxdeg = 0
    for u in range(len(indptr) - 1):
        maxdeg = max(maxdeg, indptr[u + 1] - indptr[u])
    buf = np.empty(max(maxdeg, 1))
    for k in range(len(starts)):
        s = starts[k]
        state = stream(seed, s, rounds[k])
        out[k, 0] = s
        n = 1
        while n < length:
            cur = out[k, n - 1]
            lo, hi = indptr[cur], indptr[cur + 1]
            if lo == hi:
                break  # dead end: truncate
            if n == 1:
                total = 0.0
                for j in range(lo, hi):
                    buf[j - lo] = weights[j]
                    total += weights[j]
            else:
                total = _bias_weights(indptr, indices, weights, out[k, n - 2], cur, inv_p, inv_q, buf)
            out[k, n] = indices[lo + _pick(buf, hi - lo, total, state)]
            n += 1
        lengths[k] = n


def transition_weights(g: Graph, prev: int, cur: int, p: float, q: float) -> np.ndarray:
    """Unnormalised next-step weights over ``g.neighbors(cur)`` given the walk came from ``prev``.

    Returning to ``prev`` weighs 1/p, a neighbour that ``prev`` also points
    to weighs 1, anything else 1/q; each is multiplied by the edge weight.
    """
    if not g.has_edge(prev, cur):
        raise ValueError(f"({prev}, {cur}) is not an edge")
    lo, hi = g.out_indptr[cur], g.out_indptr[cur + 1]
    out = np.empty(hi - lo)
    _bias_weights(g.out_indptr, g.out_indices, g.out_weights, prev, cur, 1.0 / p, 1.0 / q, out)
    return out


class WalkCorpus:
    """Fixed-capacity walk matrix; row ``k`` holds ``lengths[k]`` node indices."""

    def __init__(self, graph: Graph, walks: np.ndarray, lengths: np.ndarray):
        self.graph = graph
        self.walks = walks
        self.lengths = lengths

    def __len__(self) -> int:
        return len(self.lengths)

    def __iter__(self) -> Iterator[np.ndarray]:
        for row, n in zip(self.walks, self.lengths):
            yield row[:n]

    @property
    def num_tokens(self) -> int:
        return int(self.lengths.sum())

    def to_text(self) -> str:
        tok = self.graph.tokens
        return "".join(" ".join(tok[u] for u in walk.tolist()) + "\n" for walk in self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def generate_walks(g: Graph, cfg: WalkConfig) -> WalkCorpus:
    """``walks_per_node`` biased walks from every node with an out-edge.

    Walks are ordered round by round, nodes shuffled within each round.  Walk
    ``(node, round)`` draws from its own random stream, so the corpus does
    not depend on the order the walks are generated in.
    """
    eligible = np.flatnonzero(g.out_degree() > 0)
    order_rng = np.random.default_rng(derive_seed(cfg.seed, "walks", "order"))
    starts = np.concatenate([order_rng.permutation(eligible) for _ in range(cfg.walks_per_node)]) \
        if len(eligible) else np.zeros(0, dtype=np.int64)
    rounds = np.repeat(np.arange(cfg.walks_per_node), len(eligible))
    walks = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
    lengths = np.zeros(len(starts), dtype=np.int64)
    _walk_kernel(g.out_indptr, g.out_indices, g.out_weights, starts.astype(np.int64), rounds,
                 derive_seed(cfg.seed, "walks"), 1.0 / cfg.p, 1.0 / cfg.q, cfg.walk_length, walks, lengths)
    return WalkCorpus(g, walks, lengths)


# -- skip-gram -------------------------------------------------------------

@numba.njit(cache=True)
def _sgns_walks(src, ctx, walks, lengths, lo, hi, window, negatives, nprob, nalias,
                rho0, total_tokens, done0, state):
    acc = np.empty(src.shape[1])
    floor = rho0 * 1e-4
    done = done0
    for k in range(lo, hi):
        n = lengths[k]
        for i in range(n):
            rate = rho0 * (1.0 - done / total_tokens)
            if rate < floor:
                rate = floor
            done += 1
            c = walks[k, i]
            a = max(0, i - window)
            b = min(n, i + window + 1)
            for j in range(a, b):
                if j != i:
                    update_pair(src, ctx, c, walks[k, j], negatives, nprob, nalias, rate, acc, state)
    return done


@numba.njit(cache=True, parallel=True)
def _sgns_walks_parallel(src, ctx, walks, lengths, bounds, window, negatives, nprob, nalias,
                         rho0, total_tokens, dones, states):
    workers = states.shape[0]
    for w in numba.prange(workers):
        dones[w] = _sgns_walks(src, ctx, walks, lengths, bounds[w], bounds[w + 1], window, negatives,
                               nprob, nalias, rho0, total_tokens / workers, dones[w], states[w])


def skipgram_train(corpus: WalkCorpus, cfg: WalkConfig) -> EmbeddingMatrix:
    """SGNS over (centre, context) pairs within ``cfg.window`` positions on each walk.

    Returns the centre-embedding matrix.  Nodes that never occur in the
    corpus get zero rows.
    """
    if len(corpus) == 0 or corpus.num_tokens == 0:
        raise ValueError("empty walk corpus")
    g = corpus.graph
    if cfg.dim >= g.num_nodes:
        raise ValueError(f"dim {cfg.dim} must be smaller than |V| = {g.num_nodes}")
    ntab = build_alias_table(noise_weights(g.out_indptr, g.out_weights, cfg.noise_exponent))
    rng = np.random.default_rng(derive_seed(cfg.seed, "sgns", "init"))
    src = init_vectors(g.num_nodes, cfg.dim, rng)
    ctx = np.zeros_like(src)

    total = float(corpus.num_tokens * cfg.epochs)
    train_seed = derive_seed(cfg.seed, "sgns", "train")
    workers = min(cfg.workers, len(corpus))
    if workers > 1:
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
        states = np.stack([stream(train_seed, 1, w) for w in range(workers)])
        bounds = np.linspace(0, len(corpus), workers + 1).astype(np.int64)
        dones = np.zeros(workers)
    else:
        state = stream(train_seed, 1, 0)
        done = 0.0
    for epoch in range(cfg.epochs):
        if workers > 1:
            _sgns_walks_parallel(src, ctx, corpus.walks, corpus.lengths, bounds, cfg.window,
                                 cfg.negatives, ntab.prob, ntab.alias, cfg.initial_rate, total,
                                 dones, states)
        else:
            done = _sgns_walks(src, ctx, corpus.walks, corpus.lengths, 0, len(corpus), cfg.window,
                               cfg.negatives, ntab.prob, ntab.alias, cfg.initial_rate, total, done, state)
        check_finite(src, ctx, where=f"skip-gram epoch {epoch}")

    seen = np.zeros(g.num_nodes, dtype=bool)
    for walk in corpus:
        seen[walk] = True
    if not seen.all():
        logger.warning("%d node(s) never occur in the walks; their embeddings are zero",
                       int((~seen).sum()))
        src[~seen] = 0.0
    return EmbeddingMatrix(src, g.tokens, "node2vec", cfg.as_dict(),
                           {"corpus_walks": len(corpus), "corpus_tokens": corpus.num_tokens})


def node2vec_embed(g: Graph, cfg: WalkConfig | None = None) -> EmbeddingMatrix:
    cfg = cfg or WalkConfig()
    return skipgram_train(generate_walks(g, cfg), cfg)
