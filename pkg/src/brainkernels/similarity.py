"""Per-subject K x K similarity matrices and their (0, 1) normalization."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist, squareform

log = logging.getLogger(__name__)


class Method(str, enum.Enum):
    CORRELATION = "correlation"
    RBF = "rbf"
    PCA_RBF = "pca"
    L1GRAPH = "l1"
    PERSISTENCE = "persistence"


class DegenerateMatrixError(ValueError):
    """Similarity matrix carries no usable contrast."""


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    method: Method
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"similarity matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("similarity matrix has non-finite entries")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("similarity matrix is not symmetric")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "method", Method(self.method))

    @property
    def size(self) -> int:
        return self.values.shape[0]


def pearson_similarity(data) -> SimilarityMatrix:
    """Pearson correlation between rows; pairs with a constant row get 0."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError(f"need a K x N matrix with K, N >= 2, got shape {X.shape}")
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Xc, Xc))
    const = norms <= 1e-14 * np.maximum(1.0, np.abs(X).max(axis=1)) * np.sqrt(X.shape[1])
    if const.any():
        log.warning("constant series in regions %s; their correlations set to 0",
                    np.flatnonzero(const).tolist())
    safe = np.where(const, 1.0, norms)
    U = Xc / safe[:, None]
    C = U @ U.T
    np.clip(C, -1.0, 1.0, out=C)
    C[const, :] = 0.0
    C[:, const] = 0.0
    diag = np.where(const, 0.0, 1.0)
    C = (C + C.T) / 2
    np.fill_diagonal(C, diag)
    return SimilarityMatrix(C, Method.CORRELATION)


def median_gamma(features) -> float:
    """Median heuristic: gamma = 1 / (2 * median^2) over pairwise distances."""
    d = pdist(np.asarray(features, dtype=float))
    if d.size == 0 or not np.any(d > 0):
        raise ValueError("all pairwise distances are zero; set an explicit rbf gamma")
    med = np.median(d)
    if med == 0:
        med = np.median(d[d > 0])
    return 1.0 / (2.0 * med ** 2)


def rbf_similarity(data, gamma="auto", method=Method.RBF) -> SimilarityMatrix:
    """exp(-gamma * ||x_i - x_j||^2) between rows."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError("rbf_similarity expects a 2-D array")
    if gamma is None or gamma == "auto":
        gamma = median_gamma(X)
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    D2 = squareform(pdist(X, "sqeuclidean"))
    S = np.exp(-gamma * D2)
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(S, method)


def pca_features(data, d: int, axis: str = "regions") -> np.ndarray:
    """Project regions onto the top-`d` principal directions.

    ``axis="regions"`` treats the K rows as samples in N dimensions and
    returns their scores. ``axis="time"`` treats the N time points as
    samples in K dimensions and returns the K x d loadings scaled by the
    component standard deviations. Each component's largest-magnitude
    loading is made positive.
    """
    X = np.asarray(data, dtype=float)
    if axis == "time":
        X = X.T
    elif axis != "regions":
        raise ValueError(f"axis must be 'regions' or 'time', got {axis!r}")
    n, p = X.shape
    if not 1 <= d <= min(n, p):
        raise ValueError(f"component count d={d} outside [1, {min(n, p)}]")
    Xc = X - X.mean(axis=0)
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    U, s, Vt = U[:, :d], s[:d], Vt[:d]
    # sign: largest |loading| positive
    idx = np.argmax(np.abs(Vt), axis=1)
    signs = np.sign(Vt[np.arange(d), idx])
    signs[signs == 0] = 1.0
    Vt = Vt * signs[:, None]
    U = U * signs[None, :]
    if axis == "regions":
        return U * s
    return Vt.T * (s / np.sqrt(max(n - 1, 1)))


def pca_rbf_similarity(data, d: int, gamma="auto", axis: str = "regions") -> SimilarityMatrix:
    feats = pca_features(data, d, axis=axis)
    return rbf_similarity(feats, gamma, method=Method.PCA_RBF)


def off_diagonal(m: np.ndarray) -> np.ndarray:
    return m[~np.eye(m.shape[0], dtype=bool)]


def normalize_unit_interval(m: SimilarityMatrix) -> SimilarityMatrix:
    """Min-max rescale off-diagonal entries to [0, 1]; diagonal kept."""
    v = m.values
    off = off_diagonal(v)
    lo, hi = off.min(), off.max()
    if not hi > lo:
        raise DegenerateMatrixError(
            f"{m.method.value} matrix has constant off-diagonal value {lo!r}; "
            "thresholding would give a trivially complete or empty graph"
        )
    out = (v - lo) / (hi - lo)
    mask = ~np.eye(v.shape[0], dtype=bool)
    out = np.where(mask, np.clip(out, 0.0, 1.0), v)
    return replace(m, values=out, normalized=True)
