from collections import Counter, defaultdict

import numpy as np
import pytest
from scipy import stats

from graphembed.embed.node2vec import (WalkConfig, generate_walks, node2vec_embed, skipgram_train,
                                       transition_weights)
from graphembed.graph import Graph, parse_edge_list

from conftest import random_graph


def cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def brute_weights(g, prev, cur, p, q):
    out = []
    for x, w in zip(g.neighbors(cur), g.out_weights[g.out_indptr[cur]:g.out_indptr[cur + 1]]):
        if x == prev:
            out.append(w / p)
        elif x in set(g.neighbors(prev).tolist()):
            out.append(w)
        else:
            out.append(w / q)
    return np.array(out)


def test_uniform_when_p_q_one():
    g = random_graph(np.random.default_rng(0), 12, 0.4, False)
    for u, v in g.edges.tolist():
        assert np.all(transition_weights(g, u, v, 1, 1) == 1)


def test_triangle_and_path_examples():
    tri = parse_edge_list("a b\nb c\nc a", directed=False)
    w = dict(zip(tri.neighbors(1).tolist(), transition_weights(tri, 0, 1, 2.0, 4.0)))
    assert w == {0: 0.5, 2: 1.0}
    path = parse_edge_list("a b\nb c", directed=False)
    w = dict(zip(path.neighbors(1).tolist(), transition_weights(path, 0, 1, 2.0, 4.0)))
    assert w == {0: 0.5, 2: 0.25}


def test_transition_weights_match_brute_force():
    rng = np.random.default_rng(1)
    for directed in (False, True):
        g = random_graph(rng, 15, 0.3, directed)
        for u, v in g.edges.tolist():
            for p, q in [(0.25, 4), (2, 0.5)]:
                assert np.allclose(transition_weights(g, u, v, p, q), brute_weights(g, u, v, p, q))


def test_transition_weights_requires_edge():
    g = parse_edge_list("a b\nb c", directed=True)
    with pytest.raises(ValueError):
        transition_weights(g, 2, 1, 1, 1)


def test_directed_chain_truncates():
    g = parse_edge_list("a b\nb c", directed=True)
    corpus = generate_walks(g, WalkConfig(walks_per_node=3, walk_length=80))
    walks = [tuple(w.tolist()) for w in corpus]
    assert len(walks) == 3 * 2  # c has no out-edge
    assert all(w == (0, 1, 2) for w in walks if w[0] == 0)
    assert all(w == (1, 2) for w in walks if w[0] == 1)


def test_corpus_contract():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 30, 0.08, True)
    cfg = WalkConfig(walks_per_node=4, walk_length=12)
    corpus = generate_walks(g, cfg)
    eligible = np.flatnonzero(g.out_degree() > 0)
    assert len(corpus) == 4 * len(eligible)
    starts = Counter(int(w[0]) for w in corpus)
    assert all(starts[u] == 4 for u in eligible)
    for w in corpus:
        assert 1 <= len(w) <= 12
        for a, b in zip(w[:-1], w[1:]):
            assert g.has_edge(a, b)
        if len(w) < 12:
            assert g.out_degree()[w[-1]] == 0


def test_walks_deterministic():
    g = random_graph(np.random.default_rng(3), 25, 0.2, False)
    cfg = WalkConfig(p=0.5, q=2, walks_per_node=3, walk_length=20, seed=4)
    assert generate_walks(g, cfg).to_text() == generate_walks(g, cfg).to_text()


def test_cycle_uniform_transitions():
    n = 10
    g = Graph(n, [(i, (i + 1) % n) for i in range(n)], False)
    corpus = generate_walks(g, WalkConfig(walks_per_node=1000, walk_length=101, seed=5))
    fwd = back = 0
    for w in corpus:
        d = (np.diff(w) % n)
        fwd += int(np.sum(d == 1))
        back += int(np.sum(d == n - 1))
    assert fwd + back == 10**6
    assert stats.chisquare([fwd, back]).pvalue > 0.001


def _setting(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(5, 10))
    directed = bool(rng.integers(0, 2))
    g = random_graph(rng, n, 0.5, directed)
    p, q = rng.choice([0.25, 0.5, 1, 2, 4], size=2)
    return g, float(p), float(q)


@pytest.mark.parametrize("seed", range(20))
def test_transition_frequencies_chi_square(seed):
    g, p, q = _setting(seed)
    if g.num_edges == 0:
        pytest.skip("empty graph")
    corpus = generate_walks(g, WalkConfig(p=p, q=q, walks_per_node=400, walk_length=60, seed=seed))
    counts = defaultdict(Counter)
    for w in corpus:
        w = w.tolist()
        for a, b, c in zip(w, w[1:], w[2:]):
            counts[(a, b)][c] += 1
    stat, dof, total = 0.0, 0, 0
    for (a, b), ctr in counts.items():
        nbrs = g.neighbors(b).tolist()
        if len(nbrs) < 2:
            continue
        probs = transition_weights(g, a, b, p, q)
        probs = probs / probs.sum()
        obs = np.array([ctr[x] for x in nbrs])
        m = obs.sum()
        total += m
        stat += float(np.sum((obs - m * probs) ** 2 / (m * probs)))
        dof += len(nbrs) - 1
    if dof == 0:
        pytest.skip("no branching transitions")
    assert total >= 10**4
    assert stats.chi2.sf(stat, dof) > 0.001


def test_two_communities():
    k = 5
    edges = [(u, v) for u in range(k) for v in range(u + 1, k)]
    edges += [(u + k, v + k) for u, v in edges] + [(0, k)]
    g = Graph(2 * k, edges, False)
    h = node2vec_embed(g, WalkConfig(dim=4, walks_per_node=20, walk_length=20, window=3, seed=1)).vectors
    intra = np.mean([cos(h[a], h[b]) for a in range(k) for b in range(k) if a != b]
                    + [cos(h[a], h[b]) for a in range(k, 2 * k) for b in range(k, 2 * k) if a != b])
    inter = np.mean([cos(h[a], h[b]) for a in range(k) for b in range(k, 2 * k)])
    assert intra - inter > 0.2


def test_repeated_pair_converges():
    g = parse_edge_list("a b\nc d\ne f\ng h\ni j", directed=False)
    h = node2vec_embed(g, WalkConfig(dim=2, walks_per_node=200, walk_length=10, window=2,
                                     initial_rate=0.05, seed=2)).vectors
    assert cos(h[0], h[1]) > 0.95


def test_unseen_nodes_zero_rows():
    g = Graph(6, [(0, 1), (1, 2), (2, 0)], True)
    emb = node2vec_embed(g, WalkConfig(dim=2, walks_per_node=2, walk_length=5))
    assert np.all(emb.vectors[3:] == 0) and np.any(emb.vectors[:3] != 0)


def test_single_worker_reproducible_and_errors():
    g = random_graph(np.random.default_rng(6), 30, 0.15, False)
    cfg = WalkConfig(dim=8, walks_per_node=3, walk_length=15, seed=7)
    assert node2vec_embed(g, cfg).checksum() == node2vec_embed(g, cfg).checksum()
    with pytest.raises(ValueError):
        skipgram_train(generate_walks(Graph(4, [], True), cfg), WalkConfig(dim=2))
    with pytest.raises(ValueError):
        WalkConfig(p=0)


def test_multi_worker_runs():
    g = random_graph(np.random.default_rng(8), 40, 0.1, False)
    emb = node2vec_embed(g, WalkConfig(dim=8, walks_per_node=2, walk_length=10, workers=2))
    assert np.all(np.isfinite(emb.vectors))
