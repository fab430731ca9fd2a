"""Negative-sampling objective shared by the LINE and skip-gram trainers.

For a source vector ``h``, a positive context ``c`` and negatives ``n_k`` the
per-sample objective (maximised) is::

    log sigmoid(h . c) + sum_k log sigmoid(-h . n_k)

The numpy functions here are the readable reference; the ``@njit`` kernels
below do the same update inside the training loops.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

from ..alias import AliasTable, alias_draw


class Order(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass
class LineModel:
    """Trainable parameters.  First order has no separate context table."""

    vertex: np.ndarray
    context: np.ndarray | None = None

    def context_table(self, order: Order) -> np.ndarray:
        return self.vertex if Order(order) is Order.FIRST else self.context


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def sigmoid(x):
    return np.exp(log_sigmoid(x))


def sgns_objective(h: np.ndarray, pos: np.ndarray, negs: np.ndarray) -> float:
    negs = np.reshape(negs, (-1, len(h)))
    return float(log_sigmoid(h @ pos) + log_sigmoid(-(negs @ h)).sum())


def sgns_gradient(h: np.ndarray, pos: np.ndarray, negs: np.ndarray):
    """Gradient of :func:`sgns_objective` w.r.t. ``(h, pos, negs)``."""
    negs = np.reshape(negs, (-1, len(h)))
    g_pos_coef = 1.0 - sigmoid(h @ pos)
    g_neg_coef = -sigmoid(negs @ h)
    grad_h = g_pos_coef * pos + g_neg_coef @ negs
    grad_pos = g_pos_coef * h
    grad_negs = g_neg_coef[:, None] * h[None, :]
    return grad_h, grad_pos, grad_negs


def apply_update(src: np.ndarray, ctx: np.ndarray, u: int, targets, rate: float) -> None:
    """One ascent step for source ``u``: ``targets[0]`` is the positive, the rest negatives.

    Context rows are updated in order with ``src[u]`` held fixed; ``src[u]``
    moves once at the end by the accumulated gradient.
    """
    h = src[u].copy()
    acc = np.zeros_like(h)
    for k, t in enumerate(targets):
        label = 1.0 if k == 0 else 0.0
        g = (label - sigmoid(h @ ctx[t])) * rate
        acc += g * ctx[t]
        ctx[t] += g * h
    src[u] += acc


def sgns_step(model: LineModel, edge: tuple[int, int], noise: AliasTable, rate: float,
              order: Order | str, rng: np.random.Generator, negatives: int = 5) -> list[int]:
    """Single SGD step on a positive pair plus ``negatives`` noise draws.

    Draws equal to either endpoint are dropped, as the training kernels do.
    Returns the full target list that was used.
    """
    u, v = int(edge[0]), int(edge[1])
    negs = [int(n) for n in noise.sample(rng, negatives)] if negatives > 0 else []
    targets = [v] + [n for n in negs if n != u and n != v]
    apply_update(model.vertex, model.context_table(order), u, targets, rate)
    return targets


# -- numba kernels ---------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True, fastmath=True)
def _target_update(su, ct, label, rate, acc):
    f = 0.0
    for i in range(su.shape[0]):
        f += su[i] * ct[i]
    g = (label - _sigmoid(f)) * rate
    for i in range(su.shape[0]):
        acc[i] += g * ct[i]
    for i in range(su.shape[0]):
        ct[i] += g * su[i]


@numba.njit(cache=True)
def update_pair(src, ctx, u, v, negatives, nprob, nalias, rate, acc, state):
    """Positive (u, v) plus ``negatives`` alias-drawn noise targets, same rule as apply_update."""
    su = src[u]
    acc[:] = 0.0
    _target_update(su, ctx[v], 1.0, rate, acc)
    for _ in range(negatives):
        t = alias_draw(nprob, nalias, state)
        if t != u and t != v:
            _target_update(su, ctx[t], 0.0, rate, acc)
    su += acc


@numba.njit(cache=True)
def update_targets(src, ctx, u, targets, rate, acc):
    """Kernel twin of :func:`apply_update` for an explicit target list."""
    su = src[u]
    acc[:] = 0.0
    for k in range(len(targets)):
        _target_update(su, ctx[targets[k]], 1.0 if k == 0 else 0.0, rate, acc)
    su += acc


def batch_objective(src: np.ndarray, ctx: np.ndarray, pairs: np.ndarray, negs: np.ndarray) -> float:
    """Mean per-sample objective over fixed (u, v) pairs with fixed negatives.

    Negatives equal to either endpoint are ignored, matching the kernels.
    """
    h = src[pairs[:, 0]]
    pos = np.einsum("ij,ij->i", h, ctx[pairs[:, 1]])
    neg = np.einsum("ij,ikj->ik", h, ctx[negs])
    keep = (negs != pairs[:, :1]) & (negs != pairs[:, 1:])
    return float((log_sigmoid(pos) + (log_sigmoid(-neg) * keep).sum(axis=1)).mean())
