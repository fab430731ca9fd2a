"""Centrality distributions of correctly vs incorrectly classified nodes."""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .centrality import CentralityScores, Measure
from .classify import EvalReport

NUM_BINS = 32


@dataclass(frozen=True)
class ErrorSplit:
    correct: np.ndarray
    incorrect: np.ndarray

    @property
    def total(self) -> int:
        return len(self.correct) + len(self.incorrect)


def split_by_correctness(report: EvalReport) -> ErrorSplit:
    if len(report.predictions) != len(report.truth) or len(report.truth) == 0:
        raise ValueError("report is missing out-of-fold predictions")
    ok = report.correct
    return ErrorSplit(np.flatnonzero(ok), np.flatnonzero(~ok))


@dataclass(frozen=True, eq=False)
class PowerLawSeries:
    """(value, frequency) points sorted by value.

    Integer measures count exact values; continuous ones count log-spaced
    bins (``values`` are geometric bin centres) and keep zeros apart in
    ``zero_count`` since a log axis cannot show them.
    """

    algorithm: str
    measure: Measure
    values: np.ndarray
    counts: np.ndarray
    zero_count: int = 0
    binned: bool = False
    subset: str = "incorrect"
    normalized: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def total(self):
        return self.counts.sum()

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.counts.tolist()))

    def __eq__(self, other):
        if not isinstance(other, PowerLawSeries):
            return NotImplemented
        same = (self.algorithm, self.measure, self.zero_count, self.binned, self.subset, self.normalized) == \
            (other.algorithm, other.measure, other.zero_count, other.binned, other.subset, other.normalized)
        return same and np.array_equal(self.values, other.values) and np.array_equal(self.counts, other.counts)

    __hash__ = None


def log_bins(values: np.ndarray, num_bins: int = NUM_BINS) -> np.ndarray:
    pos = values[values > 0]
    if len(pos) == 0:
        return np.zeros(0)
    lo, hi = pos.min(), pos.max()
    if lo == hi:
        return np.array([lo * (1 - 1e-9), hi * (1 + 1e-9)])
    return np.geomspace(lo, hi, num_bins + 1)


def misclassified_distribution(split: ErrorSplit, scores: CentralityScores, algorithm: str = "",
                               subset: str = "incorrect", num_bins: int = NUM_BINS,
                               normalize: bool = False) -> PowerLawSeries:
    """Frequency series of ``scores`` over the incorrect (or correct) nodes.

    Log bins span the positive range of the scores over *all* nodes so that
    series from different algorithms share bins.
    """
    nodes = split.incorrect if subset == "incorrect" else split.correct
    if len(nodes) and nodes.max() >= len(scores):
        raise ValueError("centrality scores do not cover the classified nodes")
    vals = scores.values[nodes]
    zero = 0
    if scores.measure.integer_valued:
        xs, counts = np.unique(vals, return_counts=True)
        binned = False
    else:
        edges = log_bins(scores.values, num_bins)
        zero = int(np.sum(vals == 0))
        if len(edges):
            hist, _ = np.histogram(vals[vals > 0], bins=edges)
            centres = np.sqrt(edges[:-1] * edges[1:])
            keep = hist > 0
            xs, counts = centres[keep], hist[keep]
        else:
            xs, counts = np.zeros(0), np.zeros(0, dtype=np.int64)
        binned = True
    counts = counts.astype(np.int64)
    if normalize and counts.sum():
        counts = counts / counts.sum()
    return PowerLawSeries(algorithm, scores.measure, np.asarray(xs, dtype=np.float64), counts, zero,
                          binned, subset, normalize)


def series_filename(dataset: str, algorithm: str, measure: Measure | str, subset: str = "incorrect") -> str:
    return f"{dataset}.{algorithm}.{Measure(measure).value}.{subset}.dist"


def _fmt(x) -> str:
    return str(int(x)) if isinstance(x, (int, np.integer)) else f"{x:.17g}"


def emit_series(series: PowerLawSeries, destination: str | Path | TextIO, dataset: str = "",
                seed: int | None = None) -> str:
    """Write ``# dataset=.. algorithm=.. measure=.. seed=..`` then ``<value> <count>`` rows."""
    header = {"dataset": dataset, "algorithm": series.algorithm, "measure": series.measure.value,
              "seed": "" if seed is None else seed, "subset": series.subset,
              "binned": int(series.binned), "normalized": int(series.normalized),
              "zero_count": series.zero_count}
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    for x, c in zip(series.values.tolist(), series.counts.tolist()):
        buf.write(f"{x:.17g} {_fmt(c)}\n")
    text = buf.getvalue()
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)
    return text


def parse_series(text: str) -> PowerLawSeries:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing series header")
    head = dict(kv.split("=", 1) for kv in lines[0][1:].split())
    normalized = head.get("normalized", "0") == "1"
    xs, cs = [], []
    for line in lines[1:]:
        if line.strip():
            x, c = line.split()
            xs.append(float(x))
            cs.append(float(c) if normalized else int(c))
    counts = np.array(cs, dtype=np.float64 if normalized else np.int64)
    meta = {"dataset": head.get("dataset", ""), "seed": head.get("seed", "")}
    return PowerLawSeries(head["algorithm"], Measure(head["measure"]), np.array(xs, dtype=np.float64), counts,
                          int(head.get("zero_count", 0)), head.get("binned") == "1",
                          head.get("subset", "incorrect"), normalized, meta)


def low_region_share(series: Sequence[PowerLawSeries], values: np.ndarray, quantile: float = 0.25) -> float:
    """Share of the summed pairwise |count differences| that falls at or below the given quantile.

    ``values`` are the centrality values of all nodes (used to place the
    quantile).  Returns 0 when all series coincide.
    """
    threshold = np.quantile(values, quantile)
    xs = sorted(set(itertools.chain.from_iterable(s.values.tolist() for s in series)))
    table = np.array([[dict(s.points()).get(x, 0) for x in xs] for s in series], dtype=np.float64)
    xs = np.array(xs)
    low = xs <= threshold
    total = low_sum = 0.0
    for a, b in itertools.combinations(range(len(series)), 2):
        diff = np.abs(table[a] - table[b])
        total += diff.sum()
        low_sum += diff[low].sum()
    return low_sum / total if total > 0 else 0.0
