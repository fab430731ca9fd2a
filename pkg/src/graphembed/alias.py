"""Walker/Vose alias tables: O(n) construction, O(1) draws."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .rand import uniform


@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    def __len__(self) -> int:
        return len(self.prob)

    def sample(self, rng: np.random.Generator, size=None):
        n = len(self.prob)
        idx = rng.integers(0, n, size=size)
        keep = rng.random(size=size) < self.prob[idx]
        return np.where(keep, idx, self.alias[idx])

    def probabilities(self) -> np.ndarray:
        """The exact outcome distribution encoded by the table."""
        n = len(self.prob)
        p = self.prob / n
        out = p.copy()
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out


def build_alias_table(weights) -> AliasTable:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("need a non-empty 1-d weight vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    prob, alias = _vose(w / total * len(w))
    prob.setflags(write=False)
    alias.setflags(write=False)
    return AliasTable(prob, alias)


@numba.njit(cache=True)
def _vose(scaled):
    n = len(scaled)
    scaled = scaled.copy()
    prob = np.ones(n)
    alias = np.arange(n)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        l = large[nl]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small[ns] = l
            ns += 1
        else:
            large[nl] = l
            nl += 1
    # leftovers are 1 up to rounding
    return prob, alias


@numba.njit(cache=True)
def alias_draw(prob, alias, state):
    n = len(prob)
    k = np.int64(uniform(state) * n)
    if k >= n:
        k = n - 1
    if uniform(state) < prob[k]:
        return k
    return alias[k]
