"""Delay embeddings, Vietoris-Rips persistence and the scale-space kernel."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .similarity import Method, SimilarityMatrix

log = logging.getLogger(__name__)


def delay_embed(series, m: int = 2, tau: int = 3) -> np.ndarray:
    """Points (x_t, x_{t+tau}, ..., x_{t+(m-1)tau}) as rows of an array."""
    x = np.asarray(series, dtype=float).ravel()
    if m < 1 or tau < 1:
        raise ValueError(f"need m >= 1 and tau >= 1, got m={m}, tau={tau}")
    n = x.size - (m - 1) * tau
    if n < 1:
        raise ValueError(
            f"series too short for embedding: length {x.size}, need > {(m - 1) * tau}")
    return np.stack([x[k * tau: k * tau + n] for k in range(m)], axis=1)


@dataclass(frozen=True)
class PersistenceDiagram:
    """(birth, death) pairs of one homology dimension; death may be inf."""

    pairs: np.ndarray
    dimension: int

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        if np.any(p[:, 0] > p[:, 1]):
            raise ValueError("birth after death in persistence diagram")
        object.__setattr__(self, "pairs", p)

    def __len__(self):
        return len(self.pairs)

    def finite(self) -> np.ndarray:
        return self.pairs[np.isfinite(self.pairs[:, 1])]

    def capped(self, cap: float) -> np.ndarray:
        p = self.pairs.copy()
        p[:, 1] = np.minimum(p[:, 1], cap)
        return p

    def sorted_pairs(self) -> np.ndarray:
        p = self.pairs
        return p[np.lexsort((p[:, 1], p[:, 0]))] if len(p) else p


def distance_matrix(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    return D


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def rips_persistence(points, max_dim: int = 1, max_scale="auto") -> list[PersistenceDiagram]:
    """Vietoris-Rips persistence in dimensions 0 and 1 over Z/2.

    Simplices are ordered by filtration value (edge length; max edge length
    for triangles), ties broken lexicographically on sorted vertex indices.
    H0 comes from union-find over the edge order; H1 from reducing the
    coboundary matrix of edges, skipping edges already paired in H0.
    All H0 bars are kept (including zero-length ones); zero-length H1
    pairs are dropped. Classes alive at `max_scale` get death = inf.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    n = P.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    if max_dim not in (0, 1):
        raise ValueError("only max_dim 0 or 1 is supported")
    if n == 1:
        d0 = PersistenceDiagram(np.array([[0.0, np.inf]]), 0)
        return [d0] if max_dim == 0 else [d0, PersistenceDiagram(np.empty((0, 2)), 1)]

    D = distance_matrix(P)
    if max_scale is None or max_scale == "auto":
        max_scale = float(D.max())
    max_scale = float(max_scale)

    iu, ju = np.triu_indices(n, 1)
    w = D[iu, ju]
    vals, rank = np.unique(w, return_inverse=True)
    rank = rank.astype(np.int64)
    # filtration values are all distances, so values compare via ranks
    max_rank = int(np.searchsorted(vals, max_scale, side="right")) - 1
    R = np.zeros((n, n), dtype=np.int64)
    R[iu, ju] = rank
    R[ju, iu] = rank

    nn = n * n
    n3 = n * nn
    edge_key = rank * nn + iu * n + ju
    kept = np.flatnonzero(rank <= max_rank)
    order = kept[np.argsort(edge_key[kept], kind="stable")]

    # H0
    parent = list(range(n))
    negative = np.zeros(len(w), dtype=bool)
    h0 = []
    for e in order:
        a, b = _find(parent, int(iu[e])), _find(parent, int(ju[e]))
        if a != b:
            # elder rule; all births are 0 so only the merge value matters
            if a < b:
                a, b = b, a
            parent[a] = b
            negative[e] = True
            h0.append((0.0, float(w[e])))
    n_components = n - len(h0)
    h0.extend([(0.0, np.inf)] * n_components)
    diagrams = [PersistenceDiagram(np.array(h0), 0)]
    if max_dim == 0:
        return diagrams

    # H1 by coboundary reduction, columns in reverse filtration order
    verts = np.arange(n)

    def coboundary(e):
        i, j = int(iu[e]), int(ju[e])
        k = verts[(verts != i) & (verts != j)]
        r = np.maximum(np.maximum(R[i, k], R[j, k]), rank[e])
        ok = r <= max_rank
        k, r = k[ok], r[ok]
        lo = np.minimum(k, i)
        hi = np.maximum(k, j)
        mid = i + j + k - lo - hi
        return np.sort(r * n3 + lo * nn + mid * n + hi)

    cols = order[~negative[order]]
    apparent = _apparent_pivots(cols, iu, ju, rank, R, max_rank, edge_key, n)

    # owner maps a pivot to its reduced column, or to the edge index for
    # apparent pairs whose (unreduced) column is built only on demand
    owner = {}
    h1 = []
    for e, t in zip(cols[::-1], apparent[::-1]):
        birth = float(w[e])
        if t >= 0:
            owner[int(t)] = int(e)
            death = float(vals[t // n3])
            if death > birth:
                h1.append((birth, death))
            continue
        col = coboundary(e)
        while col.size:
            other = owner.get(int(col[0]))
            if other is None:
                break
            if isinstance(other, int):
                other = owner[int(col[0])] = coboundary(other)
            col = np.setxor1d(col, other, assume_unique=True)
        if col.size:
            owner[int(col[0])] = col
            death = float(vals[col[0] // n3])
            if death > birth:
                h1.append((birth, death))
        else:
            h1.append((birth, np.inf))
    diagrams.append(PersistenceDiagram(np.array(h1).reshape(-1, 2), 1))
    return diagrams


def _apparent_pivots(cols, iu, ju, rank, R, max_rank, edge_key, n, chunk=2048):
    """Pivot triangle key of each apparent-pair edge column, else -1.

    (e, t) is apparent when t is the earliest cofacet of e and e is the
    latest facet of t; such pairs are persistence pairs and no other column
    can reach pivot t, so they need no reduction.
    """
    nn, n3 = n * n, n * n * n
    big = np.iinfo(np.int64).max
    out = np.full(len(cols), -1, dtype=np.int64)
    verts = np.arange(n)[None, :]
    for s in range(0, len(cols), chunk):
        e = cols[s:s + chunk]
        i, j = iu[e][:, None], ju[e][:, None]
        r = np.maximum(np.maximum(R[i, verts], R[j, verts]), rank[e][:, None])
        lo = np.minimum(verts, i)
        hi = np.maximum(verts, j)
        mid = i + j + verts - lo - hi
        key = r * n3 + lo * nn + mid * n + hi
        bad = (verts == i) | (verts == j) | (r > max_rank)
        key = np.where(bad, big, key)
        t = key.min(axis=1)
        has = t != big
        tt = np.where(has, t, 0)
        a = (tt % n3) // nn
        b = (tt % nn) // n
        c = tt % n
        fk = np.maximum(np.maximum(R[a, b] * nn + a * n + b, R[a, c] * nn + a * n + c),
                        R[b, c] * nn + b * n + c)
        ok = has & (fk == edge_key[e])
        out[s:s + chunk] = np.where(ok, t, -1)
    return out


def pssk(F, G, sigma: float = 0.5) -> float:
    """Persistence scale-space kernel between two finite diagrams.

    (1 / 8 pi sigma) * sum_{p in F, q in G} exp(-|p-q|^2 / 8 sigma)
                                          - exp(-|p-qbar|^2 / 8 sigma),
    where qbar is q mirrored across the diagonal.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    P = _as_pairs(F)
    Q = _as_pairs(G)
    if len(P) == 0 or len(Q) == 0:
        return 0.0
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise ValueError("pssk needs finite diagrams; drop or cap infinite bars first")
    d = P[:, None, :] - Q[None, :, :]
    dbar = P[:, None, :] - Q[None, :, ::-1]
    s = np.exp(-np.sum(d * d, axis=-1) / (8 * sigma)) - np.exp(-np.sum(dbar * dbar, axis=-1) / (8 * sigma))
    return float(s.sum() / (8 * np.pi * sigma))


def _as_pairs(D) -> np.ndarray:
    if isinstance(D, PersistenceDiagram):
        D = D.pairs
    return np.asarray(D, dtype=float).reshape(-1, 2)


def pssk_gram(diagrams, sigma: float = 0.5) -> np.ndarray:
    n = len(diagrams)
    Ps = [_as_pairs(d) for d in diagrams]
    M = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            M[a, b] = M[b, a] = pssk(Ps[a], Ps[b], sigma)
    return M


def finite_h1(series, m=2, tau=3, infinite="drop", max_scale="auto") -> np.ndarray:
    """Finite Betti-1 pairs of a series' delay embedding.

    ``infinite="drop"`` discards classes that never die; ``"cap"`` sets
    their death to the truncation scale.
    """
    cloud = delay_embed(series, m, tau)
    dgm = rips_persistence(cloud, 1, max_scale)[1]
    if infinite == "drop":
        return dgm.finite()
    if infinite == "cap":
        cap = float(distance_matrix(cloud).max()) if max_scale in (None, "auto") else float(max_scale)
        return dgm.capped(cap)
    raise ValueError(f"infinite must be 'drop' or 'cap', got {infinite!r}")


def region_diagrams(data, m=2, tau=3, infinite="drop", max_scale="auto") -> list[np.ndarray]:
    out = []
    for k, row in enumerate(np.asarray(data, dtype=float)):
        try:
            out.append(finite_h1(row, m, tau, infinite, max_scale))
        except ValueError as e:
            raise ValueError(f"region {k}: {e}") from e
    return out


def persistence_similarity(data, m: int = 2, tau: int = 3, sigma: float = 0.5,
                           infinite="drop", max_scale="auto", diagrams=None) -> SimilarityMatrix:
    """K x K matrix of scale-space kernel values between per-region H1 diagrams.

    `data` is a K x N matrix (or a SubjectRecord); diagonal is zeroed.
    """
    data = getattr(data, "data", data)
    if diagrams is None:
        diagrams = region_diagrams(data, m, tau, infinite, max_scale)
    M = pssk_gram(diagrams, sigma)
    np.fill_diagonal(M, 0.0)
    return SimilarityMatrix(M, Method.PERSISTENCE)
