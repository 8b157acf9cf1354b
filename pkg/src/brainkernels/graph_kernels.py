"""Binary degree-labeled graphs, Weisfeiler-Lehman and shortest-path kernels."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .similarity import SimilarityMatrix


@dataclass(frozen=True)
class LabeledGraph:
    adjacency: np.ndarray
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=bool).copy()
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"adjacency must be square, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if A.diagonal().any():
            raise ValueError("self-loops are not allowed")
        labels = A.sum(axis=1) if self.labels is None else np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def neighbors(self):
        return [np.flatnonzero(row) for row in self.adjacency]

    def permuted(self, perm) -> "LabeledGraph":
        perm = np.asarray(perm)
        return LabeledGraph(self.adjacency[np.ix_(perm, perm)], self.labels[perm])


def binarize(m: SimilarityMatrix, threshold: float = 0.5) -> LabeledGraph:
    """Edge (i, j) iff i != j and m[i, j] > threshold; labels are degrees."""
    if not m.normalized:
        raise ValueError("binarize needs a similarity matrix normalized to [0, 1]")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    A = m.values > threshold
    np.fill_diagonal(A, False)
    A = A & A.T
    return LabeledGraph(A)


def density_threshold(m: SimilarityMatrix, density: float) -> float:
    """Threshold whose strict cut keeps about `density` of all node pairs.

    Ties at the cut value are excluded together, so the realised density
    can fall short of the target.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    iu = np.triu_indices(m.size, 1)
    v = np.sort(m.values[iu])[::-1]
    k = int(round(density * v.size))
    if k <= 0:
        return float(v[0])
    if k >= v.size:
        return float(np.nextafter(v[-1], -np.inf)) if v[-1] > 0 else 0.0
    return float(v[k])


class LabelTable:
    """Injective map from WL signatures to compact integer ids.

    One table is shared by every graph of a cohort so equal neighbourhoods
    get equal ids across graphs. Ids are handed out in first-seen order.
    """

    def __init__(self, entries=None):
        self._ids = {}
        for sig in entries or ():
            self.id(sig)

    def id(self, signature) -> int:
        got = self._ids.get(signature)
        if got is None:
            got = self._ids[signature] = len(self._ids)
        return got

    def __len__(self):
        return len(self._ids)

    def to_list(self):
        return [list(_jsonable(sig)) for sig in self._ids]

    @classmethod
    def from_list(cls, items):
        return cls(_from_jsonable(x) for x in items)


def _jsonable(sig):
    head, tail = sig
    return (head, list(tail)) if isinstance(tail, tuple) else (head, tail)


def _from_jsonable(x):
    head, tail = x
    return (head, tuple(tail)) if isinstance(tail, list) else (head, tail)


def wl_features(graphs, h: int = 3, table: LabelTable | None = None) -> tuple[list[Counter], LabelTable]:
    """Weisfeiler-Lehman subtree feature counts for each graph.

    Iteration 0 counts the initial labels; each later iteration relabels
    every node by (its label, sorted neighbour labels) compressed through
    `table`. A node without neighbours keeps its label. Each graph's counts
    total n * (h + 1).
    """
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    single = isinstance(graphs, LabeledGraph)
    if single:
        graphs = [graphs]
    table = LabelTable() if table is None else table
    feats = [Counter() for _ in graphs]
    current = []
    for g, f in zip(graphs, feats):
        ids = [table.id(("L", int(lab))) for lab in g.labels]
        f.update(ids)
        current.append(ids)
    nbrs = [g.neighbors() for g in graphs]
    for _ in range(h):
        # sequential pass over graphs in list order keeps ids deterministic
        nxt = []
        for ids, nb, f in zip(current, nbrs, feats):
            new = [table.id((ids[v], tuple(sorted(ids[u] for u in nb[v])))) if len(nb[v]) else ids[v]
                   for v in range(len(ids))]
            f.update(new)
            nxt.append(new)
        current = nxt
    return (feats[0] if single else feats), table


def _gram(feats) -> np.ndarray:
    L = len(feats)
    K = np.zeros((L, L))
    for a in range(L):
        fa = feats[a]
        for b in range(a, L):
            fb = feats[b]
            small, big = (fa, fb) if len(fa) <= len(fb) else (fb, fa)
            K[a, b] = K[b, a] = float(sum(c * big.get(k, 0) for k, c in small.items()))
    return K


def wl_kernel(graphs, h: int = 3, table: LabelTable | None = None) -> np.ndarray:
    """Gram matrix of WL subtree feature dot products."""
    feats, _ = wl_features(list(graphs), h, table)
    return _gram(feats)


def bfs_lengths(g: LabeledGraph) -> np.ndarray:
    """All-pairs hop counts by repeated BFS; -1 marks unreachable pairs."""
    nb = g.neighbors()
    n = g.n
    out = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        dist = out[s]
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            for u in nb[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    q.append(u)
    return out


def sp_features(g: LabeledGraph) -> Counter:
    """Histogram of (min endpoint label, max endpoint label, length)
    over unordered node pairs joined by a finite shortest path."""
    D = bfs_lengths(g)
    iu, ju = np.triu_indices(g.n, 1)
    d = D[iu, ju]
    ok = d > 0
    la, lb = g.labels[iu[ok]], g.labels[ju[ok]]
    keys = zip(np.minimum(la, lb).tolist(), np.maximum(la, lb).tolist(), d[ok].tolist())
    return Counter(keys)


def sp_kernel(graphs) -> np.ndarray:
    """Gram matrix of delta shortest-path kernel values."""
    return _gram([sp_features(g) for g in graphs])


def edge_density(g: LabeledGraph) -> float:
    n = g.n
    return g.n_edges / (n * (n - 1) / 2) if n > 1 else 0.0

