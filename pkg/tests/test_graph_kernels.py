import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brainkernels.graph_kernels import (LabeledGraph, LabelTable, binarize, bfs_lengths,
                                        density_threshold, edge_density, sp_features, sp_kernel,
                                        wl_features, wl_kernel)
from brainkernels.similarity import Method, SimilarityMatrix


def _norm_matrix(values):
    return SimilarityMatrix(np.asarray(values, float), Method.CORRELATION, normalized=True)


def _random_graph(rng, n, p):
    A = np.triu(rng.random((n, n)) < p, 1)
    return LabeledGraph(A | A.T)


def _families(rng):
    """Random, ring, star, block-structured and empty graphs."""
    out = [_random_graph(rng, 12, 0.3), _random_graph(rng, 9, 0.6)]
    ring = np.zeros((8, 8), bool)
    for i in range(8):
        ring[i, (i + 1) % 8] = ring[(i + 1) % 8, i] = True
    star = np.zeros((7, 7), bool)
    star[0, 1:] = star[1:, 0] = True
    blocks = np.zeros((10, 10), bool)
    blocks[:6, :6] = blocks[6:, 6:] = True
    np.fill_diagonal(blocks, False)
    out += [LabeledGraph(ring), LabeledGraph(star), LabeledGraph(blocks), LabeledGraph(np.zeros((5, 5), bool))]
    return out


class TestBinarize:

    def test_threshold_zero_complete(self):
        g = binarize(_norm_matrix([[1, 0.1, 0.2], [0.1, 1, 0.3], [0.2, 0.3, 1]]), 0.0)
        assert g.n_edges == 3 and g.labels.tolist() == [2, 2, 2]

    def test_threshold_one_empty(self):
        g = binarize(_norm_matrix([[1, 0, 1], [0, 1, 0.5], [1, 0.5, 1]]), 1.0)
        assert g.n_edges == 0 and g.labels.tolist() == [0, 0, 0]

    def test_three_nodes(self):
        g = binarize(_norm_matrix([[0, 0.2, 0.6], [0.2, 0, 0.9], [0.6, 0.9, 0]]), 0.5)
        assert g.n_edges == 2
        assert g.labels.tolist() == [1, 1, 2]

    def test_requires_normalized(self):
        with pytest.raises(ValueError, match="normalized"):
            binarize(SimilarityMatrix(np.eye(3), Method.RBF), 0.5)

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, seed, t1, t2):
        A = np.random.default_rng(seed).random((8, 8))
        m = _norm_matrix((A + A.T) / 2)
        lo, hi = min(t1, t2), max(t1, t2)
        e_lo, e_hi = binarize(m, lo).adjacency, binarize(m, hi).adjacency
        assert not np.any(e_hi & ~e_lo)

    def test_density_threshold(self, rng):
        A = rng.random((10, 10))
        m = _norm_matrix((A + A.T) / 2)
        g = binarize(m, density_threshold(m, 0.2))
        assert edge_density(g) == pytest.approx(0.2, abs=1 / 45)


class TestWL:

    def test_isolated_node(self):
        f, _ = wl_features(LabeledGraph(np.zeros((1, 1), bool)), h=2)
        assert list(f.values()) == [3]

    def test_path_two_nodes(self):
        table = LabelTable()
        f, _ = wl_features(LabeledGraph(np.array([[0, 1], [1, 0]], bool)), h=0, table=table)
        assert dict(f) == {table.id(("L", 1)): 2}

    def test_h0_is_degree_histogram(self, rng):
        g = _random_graph(rng, 15, 0.3)
        table = LabelTable()
        f, _ = wl_features(g, 0, table)
        hist = np.bincount(g.labels)
        assert dict(f) == {table.id(("L", d)): int(c) for d, c in enumerate(hist) if c}

    def test_disjoint_histograms(self):
        a = LabeledGraph(np.array([[0, 1], [1, 0]], bool))
        b = LabeledGraph(np.zeros((2, 2), bool))
        K = wl_kernel([a, b], h=0)
        assert K[0, 1] == 0 and K[0, 0] == 4 and K[1, 1] == 4

    def test_self_similarity_is_squared_norm(self, rng):
        gs = [_random_graph(rng, 10, 0.4) for _ in range(4)]
        feats, _ = wl_features(gs, 3)
        K = wl_kernel(gs, 3)
        for g, f, kk in zip(gs, feats, np.diag(K)):
            assert kk == sum(c * c for c in f.values())
            assert kk >= g.n * (3 + 1)

    def test_count_conservation(self, rng):
        gs = _families(rng)
        for h in range(5):
            feats, _ = wl_features(gs, h)
            assert [sum(f.values()) for f in feats] == [g.n * (h + 1) for g in gs]

    def test_label_table_shared_and_roundtrips(self, rng):
        gs = [_random_graph(rng, 8, 0.4) for _ in range(3)]
        feats, table = wl_features(gs, 2)
        restored = LabelTable.from_list(table.to_list())
        feats2, _ = wl_features(gs, 2, restored)
        assert feats == feats2 and len(restored) == len(table)

    def test_concordant_relabelling(self):
        # triangle and a triangle with a pendant: the pendant changes some labels only
        tri = np.zeros((3, 3), bool)
        tri[[0, 0, 1], [1, 2, 2]] = True
        tri = tri | tri.T
        big = np.zeros((4, 4), bool)
        big[:3, :3] = tri
        big[2, 3] = big[3, 2] = True
        K = wl_kernel([LabeledGraph(tri), LabeledGraph(big)], h=1)
        # h=0: three vs two degree-2 nodes; h=1: neighbour multisets differ, no overlap
        assert K[0, 1] == 3 * 2


class TestSP:

    def test_edgeless_zero(self):
        K = sp_kernel([LabeledGraph(np.zeros((4, 4), bool))] * 2)
        assert np.all(K == 0)

    def test_triangles(self):
        tri = ~np.eye(3, dtype=bool)
        K = sp_kernel([LabeledGraph(tri), LabeledGraph(tri)])
        assert K[0, 1] == 9

    def test_path_lengths(self):
        path = np.zeros((4, 4), bool)
        for i in range(3):
            path[i, i + 1] = path[i + 1, i] = True
        D = bfs_lengths(LabeledGraph(path))
        assert D[0].tolist() == [0, 1, 2, 3]
        f = sp_features(LabeledGraph(path))
        assert f[(1, 2, 1)] == 2 and f[(2, 2, 1)] == 1 and f[(1, 1, 3)] == 1

    def test_unreachable_pairs_ignored(self):
        A = np.zeros((4, 4), bool)
        A[0, 1] = A[1, 0] = True
        assert sum(sp_features(LabeledGraph(A)).values()) == 1


@pytest.mark.parametrize("kernel", ["wl", "sp"])
def test_permutation_invariance(kernel):
    rng = np.random.default_rng(11)
    for g in _families(rng):
        for _ in range(20):
            pg = g.permuted(rng.permutation(g.n))
            K = wl_kernel([g, pg], 3) if kernel == "wl" else sp_kernel([g, pg])
            assert K[0, 0] == K[0, 1] == K[1, 1]


@pytest.mark.parametrize("kernel", ["wl", "sp"])
def test_psd_and_cauchy_schwarz(kernel):
    rng = np.random.default_rng(5)
    gs = _families(rng) + [_random_graph(rng, 10, p) for p in np.linspace(0.1, 0.9, 8)]
    K = wl_kernel(gs, 3) if kernel == "wl" else sp_kernel(gs)
    ev = np.linalg.eigvalsh(K)
    assert ev.min() >= -1e-8 * ev.max()
    d = np.diag(K)
    assert np.all(K ** 2 <= np.outer(d, d) + 1e-9)


def test_labeled_graph_validation():
    with pytest.raises(ValueError):
        LabeledGraph(np.array([[0, 1], [0, 0]], bool))
    with pytest.raises(ValueError):
        LabeledGraph(np.eye(2, dtype=bool))
