"""One-vs-rest logistic regression with (nested) stratified cross-validation."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .embed.base import EmbeddingMatrix, row_normalize
from .graph import LabelTable
from .hashing import config_hash, derive_seed

logger = logging.getLogger(__name__)

C_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


# -- folds -----------------------------------------------------------------

@dataclass(frozen=True)
class FoldSplit:
    folds: np.ndarray
    k: int
    seed: int
    stratified: bool = True

    def train_val(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        return np.flatnonzero(self.folds != fold), np.flatnonzero(self.folds == fold)


def stratified_folds(labels: LabelTable | np.ndarray, k: int = 5, seed: int = 0) -> FoldSplit:
    """Shuffle each class, concatenate the classes and deal positions round-robin into k folds.

    Fold sizes and per-class counts per fold then differ by at most one.  If
    some class has fewer than ``k`` members the split falls back to a plain
    shuffled round-robin with a warning.
    """
    y = np.asarray(labels.labels if isinstance(labels, LabelTable) else labels)
    n = len(y)
    if n < k:
        raise ValueError(f"{n} labeled nodes cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        logger.warning("class with %d < %d members; using unstratified folds", counts.min(), k)
        order = rng.permutation(n)
        stratified = False
    else:
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in classes])
        stratified = True
    folds = np.empty(n, dtype=np.int64)
    folds[order] = np.arange(n) % k
    folds.setflags(write=False)
    return FoldSplit(folds, k, seed, stratified)


# -- logistic regression ---------------------------------------------------

def logreg_objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, C: float):
    """Binary L2-regularised log-loss and its gradient.

    ``theta = (w, b)``, ``y`` in {0, 1}; loss = sum log(1 + exp(z)) - y z
    + ||w||^2 / (2C) with z = Xw + b.  The bias is not regularised.
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z) + (w @ w) / (2.0 * C))
    r = _expit(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + w / C
    grad[-1] = r.sum()
    return loss, grad


def _expit(z):
    return np.exp(-np.logaddexp(0.0, -z))


def fit_binary(X: np.ndarray, y: np.ndarray, C: float, theta0: np.ndarray | None = None,
               tol: float = 1e-6, max_iter: int = 1000) -> tuple[np.ndarray, int]:
    """Damped Newton with Armijo backtracking; stops at ||grad|| <= tol."""
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    reg = np.full(d + 1, 1.0 / C)
    reg[-1] = 0.0
    theta = np.zeros(d + 1) if theta0 is None else theta0.copy()
    loss, grad = logreg_objective(theta, X, y, C)
    for it in range(max_iter):
        if np.linalg.norm(grad) <= tol:
            return theta, it
        p = _expit(Xa @ theta)
        s = p * (1.0 - p)
        H = (Xa.T * s) @ Xa
        H[np.diag_indices_from(H)] += reg + 1e-12
        try:
            step = -scipy.linalg.solve(H, grad, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = grad @ step
        t = 1.0
        while True:
            new_loss, new_grad = logreg_objective(theta + t * step, X, y, C)
            if new_loss <= loss + 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        theta, loss, grad = theta + t * step, new_loss, new_grad
    return theta, max_iter


@dataclass(frozen=True)
class LogRegModel:
    """One binary model per class id; classes absent from training never win."""

    weights: np.ndarray  # (num_classes, d)
    biases: np.ndarray
    present: np.ndarray  # bool per class
    C: float
    iterations: tuple[int, ...] = ()

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        scores = X @ self.weights.T + self.biases
        scores[:, ~self.present] = -np.inf
        return scores

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax picks the lowest class id on ties
        return np.argmax(self.decision_function(X), axis=1)

    def params(self) -> np.ndarray:
        return np.hstack([self.weights, self.biases[:, None]])


def train_ovr_logreg(X: np.ndarray, y: np.ndarray, C: float, num_classes: int | None = None,
                     warm: LogRegModel | None = None) -> LogRegModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    num_classes = int(num_classes if num_classes is not None else y.max() + 1)
    present = np.bincount(y, minlength=num_classes) > 0
    if present.sum() < 2:
        raise ValueError("one-vs-rest training needs at least two classes")
    d = X.shape[1]
    W = np.zeros((num_classes, d))
    b = np.zeros(num_classes)
    iters = []
    for c in range(num_classes):
        if not present[c]:
            iters.append(0)
            continue
        theta0 = warm.params()[c] if warm is not None and warm.present[c] else None
        theta, it = fit_binary(X, (y == c).astype(np.float64), C, theta0)
        W[c], b[c] = theta[:-1], theta[-1]
        iters.append(it)
    return LogRegModel(W, b, present, C, tuple(iters))


def micro_f1(predictions: Sequence[int], truth: Sequence[int]) -> float:
    """Micro-averaged F1 from pooled per-class TP/FP/FN."""
    pred, true = np.asarray(predictions), np.asarray(truth)
    if len(pred) == 0:
        raise ValueError("micro-F1 of an empty prediction set")
    if pred.shape != true.shape:
        raise ValueError("predictions and truth differ in length")
    classes = np.union1d(pred, true)
    tp = fp = fn = 0
    for c in classes:
        tp += int(np.sum((pred == c) & (true == c)))
        fp += int(np.sum((pred == c) & (true != c)))
        fn += int(np.sum((pred != c) & (true == c)))
    return 2.0 * tp / (2.0 * tp + fp + fn)


# -- hyperparameter grid ---------------------------------------------------

@dataclass(frozen=True)
class HyperGrid:
    """Classifier axes (C, normalize) crossed with embedding axes (dim + extras such as p, q)."""

    C_values: tuple[float, ...] = C_GRID
    dims: tuple[int, ...] = (128, 256)
    normalize: tuple[bool, ...] = (False, True)
    extra: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "C_values", tuple(sorted(float(c) for c in self.C_values)))
        object.__setattr__(self, "dims", tuple(sorted(int(d) for d in self.dims)))
        object.__setattr__(self, "normalize", tuple(sorted(bool(x) for x in self.normalize)))
        object.__setattr__(self, "extra", {k: tuple(sorted(v)) for k, v in sorted(dict(self.extra).items())})
        if not self.C_values or not self.dims or not self.normalize or any(not v for v in self.extra.values()):
            raise ValueError("every grid axis needs at least one value")

    def embedding_points(self) -> list[dict]:
        keys = ["dim", *self.extra]
        axes = [self.dims, *self.extra.values()]
        return [dict(zip(keys, vals)) for vals in itertools.product(*axes)]

    def size(self) -> int:
        return len(self.C_values) * len(self.normalize) * len(self.embedding_points())

    def as_dict(self) -> dict:
        return {"C_values": list(self.C_values), "dims": list(self.dims),
                "normalize": list(self.normalize), "extra": {k: list(v) for k, v in self.extra.items()}}


def _tie_key(point: dict) -> tuple:
    """Ordering for tie-breaks: (C, dim, normalize, extras by name)."""
    return (point["C"], point["dim"], point["normalize"], *(point[k] for k in sorted(point)
                                                            if k not in ("C", "dim", "normalize")))


# -- evaluation --------------------------------------------------------------

@dataclass
class EvalReport:
    fold_scores: list[float]
    chosen: list[dict]
    truth: np.ndarray
    predictions: np.ndarray
    fold_of: np.ndarray
    tokens: tuple[str, ...] = ()
    info: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_scores))  # population

    @property
    def correct(self) -> np.ndarray:
        return self.predictions == self.truth

    def to_text(self) -> str:
        lines = [f"# {k}={v}\n" for k, v in sorted(self.info.items())]
        lines.append(f"mean_micro_f1 {self.mean:.17g}\n")
        lines.append(f"std_micro_f1 {self.std:.17g}\n")
        for f, (s, ch) in enumerate(zip(self.fold_scores, self.chosen)):
            hp = ",".join(f"{k}={ch[k]}" for k in sorted(ch))
            lines.append(f"fold {f} {s:.17g} {hp}\n")
        lines.append("node true predicted correct fold\n")
        for i in range(len(self.truth)):
            tok = self.tokens[i] if self.tokens else str(i)
            lines.append(f"{tok} {self.truth[i]} {self.predictions[i]} {int(self.correct[i])} {self.fold_of[i]}\n")
        return "".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        scores, chosen, info = [], [], {}
        toks, truth, pred, folds = [], [], [], []
        table = False
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                info[k] = v
            elif table:
                tok, t, p, _, f = line.split()
                toks.append(tok)
                truth.append(int(t))
                pred.append(int(p))
                folds.append(int(f))
            elif line.startswith("fold "):
                _, _, s, *hp = line.split(" ")
                scores.append(float(s))
                chosen.append(dict(_parse_hp(kv) for kv in hp[0].split(",")) if hp and hp[0] else {})
            elif line.startswith("node "):
                table = True
        return cls(scores, chosen, np.array(truth, dtype=np.int64), np.array(pred, dtype=np.int64),
                   np.array(folds, dtype=np.int64), tuple(toks), info)


def _parse_hp(kv: str):
    k, v = kv.split("=")
    if v in ("True", "False"):
        return k, v == "True"
    for conv in (int, float):
        try:
            return k, conv(v)
        except ValueError:
            pass
    return k, v


EmbeddingProvider = Callable[[dict], EmbeddingMatrix]


class ProviderError(RuntimeError):
    """The embedding provider failed for a grid point; the original error is ``__cause__``."""

    def __init__(self, point: dict, exc: BaseException):
        super().__init__(f"embedding provider failed for {point}: {type(exc).__name__}: {exc}")
        self.point = point


class CachedProvider:
    """Memoises an embedding provider on the config hash of the requested point."""

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self._cache: dict[str, EmbeddingMatrix] = {}
        self.calls = 0

    def __call__(self, point: dict) -> EmbeddingMatrix:
        key = config_hash(point)
        if key not in self._cache:
            self.calls += 1
            self._cache[key] = self.provider(dict(point))
        return self._cache[key]


def _features(emb: EmbeddingMatrix, normalize: bool) -> np.ndarray:
    return row_normalize(emb.vectors) if normalize else np.asarray(emb.vectors)


def _cv_scores(X: np.ndarray, y: np.ndarray, folds: FoldSplit, C_values: Sequence[float],
               num_classes: int) -> dict[float, float]:
    """Mean micro-F1 over folds for every C (ascending C, warm-started)."""
    totals = {C: 0.0 for C in C_values}
    for f in range(folds.k):
        tr, va = folds.train_val(f)
        model = None
        for C in C_values:
            model = train_ovr_logreg(X[tr], y[tr], C, num_classes, warm=model)
            totals[C] += micro_f1(model.predict(X[va]), y[va])
    return {C: s / folds.k for C, s in totals.items()}


def cross_validate(emb: EmbeddingMatrix, labels: LabelTable, C: float, normalize: bool,
                   k: int = 5, seed: int = 0) -> EvalReport:
    """Plain k-fold CV at a fixed hyperparameter setting."""
    y = labels.labels
    X = _features(emb, normalize)
    folds = stratified_folds(labels, k, seed)
    preds = np.empty_like(y)
    scores = []
    for f in range(k):
        tr, va = folds.train_val(f)
        model = train_ovr_logreg(X[tr], y[tr], C, labels.num_classes)
        preds[va] = model.predict(X[va])
        scores.append(micro_f1(preds[va], y[va]))
    point = {"C": float(C), "normalize": bool(normalize), "dim": emb.dim}
    return EvalReport(scores, [point] * k, y.copy(), preds, folds.folds.copy(), emb.tokens,
                      {"seed": seed, "k": k})


def nested_cv(provider: EmbeddingProvider, labels: LabelTable, grid: HyperGrid, seed: int = 0,
              k: int = 5, inner_k: int = 4) -> EvalReport:
    """Outer k-fold CV; each outer training set picks hyperparameters by inner CV.

    Embeddings are computed once per embedding point on the whole graph
    (transductive) and reused across folds.  Inner-CV ties go to the
    smallest (C, dim, normalize, extras...) tuple.
    """
    provider = provider if isinstance(provider, CachedProvider) else CachedProvider(provider)
    y = labels.labels
    nc = labels.num_classes
    outer = stratified_folds(labels, k, seed)
    points = grid.embedding_points()
    feats: dict[tuple[str, bool], np.ndarray] = {}

    def features(point: dict, normalize: bool) -> np.ndarray:
        key = (config_hash(point), normalize)
        if key not in feats:
            try:
                emb = provider(point)
            except Exception as exc:
                raise ProviderError(point, exc) from exc
            if emb.num_nodes != len(y):
                raise ValueError(f"embedding covers {emb.num_nodes} nodes, labels {len(y)}")
            feats[key] = _features(emb, normalize)
        return feats[key]

    preds = np.empty_like(y)
    scores, chosen = [], []
    single = grid.size() == 1
    for f in range(k):
        tr, va = outer.train_val(f)
        candidates = []
        if single:
            candidates.append((0.0, {**points[0], "C": grid.C_values[0], "normalize": grid.normalize[0]}))
        else:
            inner = stratified_folds(y[tr], inner_k, derive_seed(seed, "inner", f))
            for point in points:
                for normalize in grid.normalize:
                    X = features(point, normalize)[tr]
                    for C, s in _cv_scores(X, y[tr], inner, grid.C_values, nc).items():
                        candidates.append((s, {**point, "C": C, "normalize": normalize}))
        best_score = max(s for s, _ in candidates)
        best = min((p for s, p in candidates if s == best_score), key=_tie_key)
        emb_point = {key: best[key] for key in points[0]}
        X = features(emb_point, best["normalize"])
        model = train_ovr_logreg(X[tr], y[tr], best["C"], nc)
        preds[va] = model.predict(X[va])
        scores.append(micro_f1(preds[va], y[va]))
        chosen.append(best)
        logger.info("outer fold %d: micro-F1 %.4f with %s", f, scores[-1], best)

    tokens = provider(points[0]).tokens
    return EvalReport(scores, chosen, y.copy(), preds, outer.folds.copy(), tokens,
                      {"seed": seed, "k": k, "inner_k": inner_k, "grid_size": grid.size()})
