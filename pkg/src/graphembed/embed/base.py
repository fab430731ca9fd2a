from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..hashing import config_hash


class ResourceExhausted(RuntimeError):
    """The requested embedding does not fit in the available memory."""

    def __init__(self, message: str, required_bytes: int | None = None, available_bytes: int | None = None):
        super().__init__(message)
        self.required_bytes = required_bytes
        self.available_bytes = available_bytes


@dataclass(frozen=True)
class EmbeddingMatrix:
    """|V| x d node embedding; row ``u`` belongs to node token ``tokens[u]``."""

    vectors: np.ndarray
    tokens: tuple[str, ...]
    algorithm: str = ""
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.tokens):
            raise ValueError("vectors must be a |V| x d matrix with one row per token")
        if v.shape[1] >= max(v.shape[0], 1):
            raise ValueError(f"dimension {v.shape[1]} must be smaller than |V| = {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def num_nodes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def config_hash(self) -> str:
        return config_hash({"algorithm": self.algorithm, **self.config})

    def to_text(self) -> str:
        lines = [f"{self.num_nodes} {self.dim}\n"]
        for tok, row in zip(self.tokens, self.vectors.tolist()):
            lines.append(tok + " " + " ".join(f"{x:.17g}" for x in row) + "\n")
        return "".join(lines)

    def checksum(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def save(self, path) -> None:
        """Write the word-vector text file plus a ``.meta.json`` sidecar."""
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        meta = {"algorithm": self.algorithm, "config": self.config,
                "config_hash": self.config_hash, "metadata": self.metadata}
        sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingMatrix":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            n, d = map(int, fh.readline().split())
            tokens, rows = [], np.empty((n, d))
            for i in range(n):
                parts = fh.readline().split()
                if len(parts) != d + 1:
                    raise ValueError(f"{path}: row {i + 2} has {len(parts) - 1} values, expected {d}")
                tokens.append(parts[0])
                rows[i] = [float(x) for x in parts[1:]]
        meta = {}
        if sidecar(path).exists():
            meta = json.loads(sidecar(path).read_text())
        return cls(rows, tokens, meta.get("algorithm", ""), meta.get("config", {}), meta.get("metadata", {}))


def sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def row_normalize(x: np.ndarray) -> np.ndarray:
    """Scale rows to unit L2 norm; zero rows stay zero."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def noise_weights(indptr: np.ndarray, weights: np.ndarray, exponent: float = 0.75) -> np.ndarray:
    """Negative-sampling distribution: (weighted out-degree) ** exponent."""
    n = len(indptr) - 1
    src = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(src, weights=weights, minlength=n) ** exponent


def init_vectors(num_nodes: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random((num_nodes, dim)) - 0.5) / dim


def check_finite(*arrays: np.ndarray, where: str = "") -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a))
            raise FloatingPointError(
                f"non-finite parameters during {where}: {len(bad)} entries, first at row {bad[0][0]}; "
                "lower the learning rate")
