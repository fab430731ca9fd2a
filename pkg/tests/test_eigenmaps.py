import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from graphembed.embed import eigenmaps as em
from graphembed.embed.base import ResourceExhausted
from graphembed.embed.eigenmaps import eigenmaps_embed, normalized_laplacian
from graphembed.graph import ContractViolation, Graph, parse_edge_list

from conftest import random_graph


def dense_laplacian(g: Graph) -> np.ndarray:
    A = g.adjacency().toarray()
    deg = A.sum(axis=1)
    inv = np.where(deg > 0, 1 / np.sqrt(np.where(deg > 0, deg, 1)), 0)
    return np.eye(g.num_nodes) - inv[:, None] * A * inv[None, :]


def test_k2():
    g = parse_edge_list("a b", directed=False)
    L = normalized_laplacian(g).matrix.toarray()
    assert np.allclose(L, [[1, -1], [-1, 1]])
    assert np.allclose(np.linalg.eigvalsh(L), [0, 2])


def test_triangle_spectrum():
    g = parse_edge_list("a b\nb c\nc a", directed=False)
    assert np.allclose(np.linalg.eigvalsh(normalized_laplacian(g).matrix.toarray()), [0, 1.5, 1.5])


def test_directed_is_contract_violation():
    g = parse_edge_list("a b", directed=True)
    with pytest.raises(ContractViolation):
        normalized_laplacian(g)
    with pytest.raises(ContractViolation):
        eigenmaps_embed(g, 1)


def test_p4_fiedler_monotone():
    g = parse_edge_list("a b\nb c\nc d", directed=False)
    v = eigenmaps_embed(g, 1).vectors[:, 0]
    assert np.all(np.diff(v) > 0) or np.all(np.diff(v) < 0)
    assert np.sign(v[0]) != np.sign(v[3])


def test_two_triangles_separated():
    g = parse_edge_list("a b\nb c\nc a\nd e\ne f\nf d", directed=False)
    v = eigenmaps_embed(g, 1).vectors[:, 0]
    assert len(set(np.sign(v[:3]))) == 1 and len(set(np.sign(v[3:]))) == 1
    assert np.sign(v[0]) != np.sign(v[3])


def test_isolated_nodes_get_zero_rows():
    g = Graph(6, [(0, 1), (1, 2), (2, 3), (3, 4)], False)
    emb = eigenmaps_embed(g, 2)
    assert np.all(emb.vectors[5] == 0)
    assert np.any(emb.vectors[:5] != 0)


def test_degenerate_dimension_request():
    g = parse_edge_list("a b\nb c", directed=False)
    with pytest.raises(ValueError):
        eigenmaps_embed(g, 2)
    with pytest.raises(ValueError):
        eigenmaps_embed(g, 3)
    g = parse_edge_list("a b\nb c\nc d", directed=False)
    assert eigenmaps_embed(g, 2).dim == 2


def test_resource_exhaustion_is_structured(monkeypatch):
    monkeypatch.setattr(em, "_available_memory", lambda: 1024)
    g = random_graph(np.random.default_rng(0), 60, 0.1, False)
    with pytest.raises(ResourceExhausted):
        eigenmaps_embed(g, 3)
    with pytest.raises(ResourceExhausted):
        eigenmaps_embed(g, 3, dense_threshold=0)


def test_sparse_solver_agrees_with_dense():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 300, 0.03, False)
    dense = eigenmaps_embed(g, 6)
    sparse = eigenmaps_embed(g, 6, seed=1, dense_threshold=0)
    assert np.allclose(dense.metadata["eigenvalues"], sparse.metadata["eigenvalues"], atol=1e-9)
    assert max(sparse.metadata["residuals"]) <= 1e-8
    vals = np.array(dense.metadata["eigenvalues"])
    gaps = np.diff(vals)
    if np.all(gaps > 1e-6):  # simple spectrum: vectors agree after sign fixing
        assert np.allclose(dense.vectors, sparse.vectors, atol=1e-6)


def test_sparse_path_is_deterministic():
    g = random_graph(np.random.default_rng(4), 200, 0.04, False)
    a = eigenmaps_embed(g, 4, seed=9, dense_threshold=0)
    b = eigenmaps_embed(g, 4, seed=9, dense_threshold=0)
    assert np.array_equal(a.vectors, b.vectors)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 50), st.floats(0.05, 0.6), st.integers(0, 2**31), st.integers(1, 6))
def test_matches_dense_oracle(n, p, seed, d):
    g = random_graph(np.random.default_rng(seed), n, p, False)
    active = g.out_degree() > 0
    if active.sum() - 1 <= d:
        return
    L = dense_laplacian(g)
    La = L[np.ix_(active, active)]
    oracle = scipy.linalg.eigvalsh(La)
    assert abs(oracle[0]) <= 1e-9  # lambda_min = 0
    emb = eigenmaps_embed(g, d)
    vals = np.array(emb.metadata["eigenvalues"])
    assert np.allclose(vals, oracle[1:d + 1], atol=1e-9)
    assert np.all(np.diff(vals) >= -1e-12)
    V = emb.vectors[active]
    assert np.max(np.linalg.norm(La @ V - V * vals, axis=0)) <= 1e-8
    assert np.allclose(np.linalg.norm(V, axis=0), 1)
    gram = V.T @ V
    assert np.max(np.abs(gram - np.eye(d))) <= 1e-8
    for j in range(d):
        top = V[np.abs(V[:, j]) >= np.abs(V[:, j]).max() - 1e-10, j]
        if np.all(np.sign(top) == np.sign(top[0])):
            assert top[0] > 0
    # every eigenvalue of L lies in [0, 2]
    assert -1e-9 <= oracle[0] and oracle[-1] <= 2 + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 30), st.integers(0, 2**31))
def test_permutation_equivariance(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.4, False)
    if np.any(g.out_degree() == 0):
        return
    spectrum = np.linalg.eigvalsh(dense_laplacian(g))
    if np.min(np.diff(spectrum[:4])) < 1e-6:
        return  # repeated eigenvalues: the basis is not unique
    emb = eigenmaps_embed(g, 2)
    perm = rng.permutation(n)
    other = eigenmaps_embed(g.relabel(perm), 2).vectors[perm]
    for j in range(2):
        v = emb.vectors[:, j]
        if abs(np.sum(v ** 3)) < 1e-9 and np.sum(np.isclose(np.abs(v), np.abs(v).max())) > 1:
            # v and -v are related by a graph automorphism; no node-order-free sign exists
            assert np.allclose(np.abs(other[:, j]), np.abs(v), atol=1e-8)
        else:
            assert np.allclose(other[:, j], v, atol=1e-8)
