"""Stable hashes for configs and seed derivation."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def _default(o):
    if hasattr(o, "value"):  # enums
        return o.value
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not hashable as config: {type(o).__name__}")


def config_hash(obj, length: int = 16) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:length]


def derive_seed(master: int, *names) -> int:
    """Deterministic 63-bit sub-seed from a master seed and stage/component names."""
    digest = hashlib.sha256(canonical_json([int(master), *map(str, names)]).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
