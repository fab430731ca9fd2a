"""LINE first- and second-order proximity embeddings trained by edge-sampled SGD."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from ..alias import alias_draw, build_alias_table
from ..graph import Graph
from ..hashing import derive_seed
from ..rand import stream
from .base import EmbeddingMatrix, check_finite, init_vectors, noise_weights
from .sgns import LineModel, Order, batch_objective, update_pair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineConfig:
    order: Order = Order.FIRST
    dim: int = 128
    negatives: int = 5
    initial_rate: float = 0.025
    total_samples: int | None = None  # None -> 100 * |E|
    workers: int = 1
    seed: int = 0
    noise_exponent: float = 0.75
    windows: int = 20  # loss checkpoints over the run

    def __post_init__(self):
        object.__setattr__(self, "order", Order(self.order))
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if self.initial_rate <= 0:
            raise ValueError("initial_rate must be positive")
        if self.total_samples is not None and self.total_samples < 1:
            raise ValueError("total_samples must be >= 1")
        if self.dim < 1 or self.workers < 1:
            raise ValueError("dim and workers must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["order"] = self.order.value
        return d


@numba.njit(cache=True)
def _train_range(src, ctx, esrc, edst, eprob, ealias, nprob, nalias, negatives,
                 rho0, total, t0, t1, step, state):
    acc = np.empty(src.shape[1])
    floor = rho0 * 1e-4
    for t in range(t0, t1, step):
        rate = rho0 * (1.0 - t / total)
        if rate < floor:
            rate = floor
        e = alias_draw(eprob, ealias, state)
        update_pair(src, ctx, esrc[e], edst[e], negatives, nprob, nalias, rate, acc, state)


@numba.njit(cache=True, parallel=True)
def _train_range_parallel(src, ctx, esrc, edst, eprob, ealias, nprob, nalias, negatives,
                          rho0, total, t0, t1, states):
    # lock-free shared updates; worker w takes every workers-th sample
    workers = states.shape[0]
    for w in numba.prange(workers):
        _train_range(src, ctx, esrc, edst, eprob, ealias, nprob, nalias, negatives,
                     rho0, total, t0 + w, t1, workers, states[w])


def _edge_arrays(g: Graph):
    if g.directed:
        return g.edges[:, 0].copy(), g.edges[:, 1].copy(), g.weights.copy()
    e = g.edges
    return (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]),
            np.concatenate([g.weights, g.weights]))


def line_train(g: Graph, cfg: LineConfig | None = None) -> EmbeddingMatrix:
    """Train LINE on ``g`` and return the vertex embeddings.

    Edges are drawn with probability proportional to weight (undirected
    edges in both orientations), negatives from out-degree**0.75.  The
    learning rate decays linearly from ``initial_rate`` to 1e-4 of it.
    ``metadata["loss_trace"]`` holds the mean negative-sampling loss on a
    fixed monitor sample of edges, before training and after each window.
    """
    cfg = cfg or LineConfig()
    if g.num_edges == 0:
        raise ValueError("LINE needs at least one edge")
    if cfg.dim >= g.num_nodes:
        raise ValueError(f"dim {cfg.dim} must be smaller than |V| = {g.num_nodes}")
    total = cfg.total_samples or 100 * g.num_edges
    esrc, edst, ew = _edge_arrays(g)
    etab = build_alias_table(ew)
    ntab = build_alias_table(noise_weights(g.out_indptr, g.out_weights, cfg.noise_exponent))

    rng = np.random.default_rng(derive_seed(cfg.seed, "line", "init"))
    vertex = init_vectors(g.num_nodes, cfg.dim, rng)
    model = LineModel(vertex, np.zeros_like(vertex) if cfg.order is Order.SECOND else None)
    ctx = model.context_table(cfg.order)

    mon_rng = np.random.default_rng(derive_seed(cfg.seed, "line", "monitor"))
    mon_edges = etab.sample(mon_rng, min(1000, len(esrc)))
    mon_pairs = np.stack([esrc[mon_edges], edst[mon_edges]], axis=1)
    mon_negs = ntab.sample(mon_rng, (len(mon_pairs), max(cfg.negatives, 1)))

    train_seed = derive_seed(cfg.seed, "line", "train")
    states = np.stack([stream(train_seed, 0, w) for w in range(cfg.workers)])
    if cfg.workers > 1:
        numba.set_num_threads(min(cfg.workers, numba.config.NUMBA_NUM_THREADS))

    trace = [-batch_objective(vertex, ctx, mon_pairs, mon_negs)]
    window = math.ceil(total / max(cfg.windows, 1))
    for t0 in range(0, total, window):
        t1 = min(total, t0 + window)
        args = (vertex, ctx, esrc, edst, etab.prob, etab.alias, ntab.prob, ntab.alias,
                cfg.negatives, cfg.initial_rate, float(total), t0, t1)
        if cfg.workers > 1:
            _train_range_parallel(*args, states)
        else:
            _train_range(*args, 1, states[0])
        check_finite(vertex, ctx, where=f"LINE-{cfg.order.value} samples {t0}..{t1}")
        trace.append(-batch_objective(vertex, ctx, mon_pairs, mon_negs))
    logger.debug("LINE-%s loss trace %s", cfg.order.value, trace)

    return EmbeddingMatrix(vertex, g.tokens, f"line-{cfg.order.value}", cfg.as_dict(),
                           {"total_samples": total, "loss_trace": trace})
