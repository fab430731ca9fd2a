"""Laplacian eigenmaps on the symmetric normalized Laplacian."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ..graph import ContractViolation, Graph
from .base import EmbeddingMatrix, ResourceExhausted

logger = logging.getLogger(__name__)

DENSE_THRESHOLD = 2000
RESIDUAL_TOL = 1e-8


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class NormalizedLaplacian:
    """L = I - D^-1/2 A D^-1/2; isolated nodes get an identity row and column."""

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees == 0


def normalized_laplacian(g: Graph) -> NormalizedLaplacian:
    if g.directed:
        raise ContractViolation("Laplacian eigenmaps only support undirected graphs")
    a = g.adjacency()
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
    scaled = sp.diags(inv_sqrt) @ a @ sp.diags(inv_sqrt)
    lap = (sp.identity(g.num_nodes, format="csr") - scaled).tocsr()
    lap = ((lap + lap.T) * 0.5).tocsr()  # exact symmetry
    return NormalizedLaplacian(lap, deg)


def _available_memory() -> int:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return 1 << 62


def _null_basis(lap: sp.csr_matrix, deg: np.ndarray) -> np.ndarray:
    """Orthonormal kernel basis: trivial D^1/2 1 first, then one vector per extra component.

    Component vectors are Gram-Schmidt orthogonalised in order of their
    smallest node index, which keeps the basis deterministic.
    """
    ncomp, comp = connected_components(lap != 0, directed=False)
    root = np.sqrt(deg)
    basis = [root / np.linalg.norm(root)]
    first = {}
    for u, c in enumerate(comp):
        first.setdefault(c, u)
    for c in sorted(first, key=first.get)[:-1]:
        v = np.where(comp == c, root, 0.0)
        for b in basis:
            v -= (b @ v) * b
        basis.append(v / np.linalg.norm(v))
    return np.column_stack(basis)


def _smallest_pairs(lap: sp.csr_matrix, k: int, seed: int, dense_threshold: int):
    n = lap.shape[0]
    if n < dense_threshold:
        if 8 * n * n * 3 > _available_memory():
            raise ResourceExhausted("dense eigendecomposition does not fit in memory", 24 * n * n)
        vals, vecs = scipy.linalg.eigh(lap.toarray(), subset_by_index=[0, k - 1])
        return vals, vecs
    ncv = min(n, max(2 * k + 1, 20))
    need = 8 * n * ncv * 2 + 40 * lap.nnz
    if need > _available_memory():
        raise ResourceExhausted(f"Lanczos basis for {n} nodes needs ~{need >> 20} MiB",
                                need, _available_memory())
    v0 = np.random.default_rng(seed).random(n)
    try:
        # shift-invert just left of the spectrum: L + 0.01 I is positive definite
        vals, vecs = eigsh(lap.tocsc(), k=k, sigma=-0.01, which="LM", v0=v0, ncv=ncv, tol=0)
    except ArpackNoConvergence as exc:
        raise EigensolverError(f"eigensolver did not converge ({len(exc.eigenvalues)} of {k} pairs)") from exc
    except MemoryError as exc:
        raise ResourceExhausted(f"out of memory factorising the {n}-node Laplacian") from exc
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _fix_signs(vecs: np.ndarray, tie_tol: float = 1e-10) -> np.ndarray:
    """Make each column's largest-magnitude entry positive.

    If entries of opposite sign tie for the largest magnitude, the sign of
    sum(v**3) decides instead, which does not depend on node order.
    """
    out = vecs.copy()
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        mag = np.abs(v)
        top = v[mag >= mag.max() - tie_tol]
        if np.all(top > 0) or np.all(top < 0):
            s = np.sign(top[0])
        else:
            s = np.sign(np.sum(v ** 3))
            if abs(np.sum(v ** 3)) < tie_tol:
                s = np.sign(v[np.argmax(mag)])
        out[:, j] = v * (s if s != 0 else 1.0)
    return out


def eigenmaps_embed(g: Graph, d: int, seed: int = 0, dense_threshold: int = DENSE_THRESHOLD) -> EmbeddingMatrix:
    """Embed nodes with the eigenvectors of the ``d`` smallest non-trivial eigenvalues.

    The trivial D^1/2 1 eigenvector is skipped; with several connected
    components the remaining zero-eigenvalue vectors are kept, built
    explicitly from component indicators.  Each column has unit norm and its
    largest-magnitude entry positive.  Isolated nodes get zero rows.

    ``metadata`` carries the eigenvalues and the eigenpair residual norms.
    """
    if g.directed:
        raise ContractViolation("Laplacian eigenmaps only support undirected graphs")
    if d < 1:
        raise ValueError("d must be >= 1")
    nl = normalized_laplacian(g)
    active = np.flatnonzero(~nl.isolated)
    if len(active) < g.num_nodes:
        logger.warning("%d isolated node(s) receive zero embeddings", g.num_nodes - len(active))
    n = len(active)
    if d >= n - 1:
        # asking for every non-trivial pair is treated as degenerate too
        raise ValueError(f"d={d} must be below the {max(n - 1, 0)} non-trivial eigenpairs available")
    lap = nl.matrix[active][:, active].tocsr()
    null = _null_basis(lap, nl.degrees[active])
    c = null.shape[1]

    if c >= d + 1:
        vals = np.zeros(d + 1)
        vecs = null[:, : d + 1]
    else:
        vals, vecs = _smallest_pairs(lap, d + 1, seed, dense_threshold)
        # the solver's basis of the kernel is arbitrary; replace it with the explicit one
        vals[:c] = 0.0
        vecs[:, :c] = null
    vals, vecs = vals[1:], _fix_signs(vecs[:, 1:])
    vecs /= np.linalg.norm(vecs, axis=0)

    residuals = np.linalg.norm(lap @ vecs - vecs * vals, axis=0)
    if np.max(residuals) > RESIDUAL_TOL:
        raise EigensolverError(f"eigenpair residual {np.max(residuals):.2e} above {RESIDUAL_TOL}")

    rows = np.zeros((g.num_nodes, d))
    rows[active] = vecs
    return EmbeddingMatrix(rows, g.tokens, "eigenmaps", {"dim": d, "seed": seed},
                           {"eigenvalues": vals.tolist(), "residuals": residuals.tolist(),
                            "components": int(c)})
