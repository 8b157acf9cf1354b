"""l1 graph: nonnegative sparse coding of each region over all others."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .similarity import Method, SimilarityMatrix

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None, region=None):
        super().__init__(msg)
        self.residual = residual
        self.region = region


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.1
    tol: float = 1e-6
    max_iter: int = 10000

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class SparseCode:
    coefficients: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    history: list = field(default_factory=list, repr=False)


def lasso_objective(X, i, a, lam) -> float:
    r = X[:, i] - X @ a
    return float(r @ r + lam * np.abs(a).sum())


def kkt_residual(X, i, a, lam) -> float:
    """Max violation of the optimality conditions of the nonnegative LASSO.

    With g_j = -2 x_j^T r + lam: active coordinates need |g_j| = 0,
    inactive ones need g_j >= 0. Coordinate i is fixed at zero and ignored.
    """
    X = np.asarray(X, dtype=float)
    a = np.asarray(a, dtype=float)
    r = X[:, i] - X @ a
    g = -2.0 * (X.T @ r) + lam
    viol = np.where(a > 0, np.abs(g), np.maximum(-g, 0.0))
    viol[i] = 0.0
    return float(viol.max()) if viol.size else 0.0


def solve_nonneg_lasso(X, i: int, cfg: SolverConfig = SolverConfig()) -> SparseCode:
    """min ||x_i - X a||^2 + lam * ||a||_1  s.t.  a >= 0, a_i = 0.

    Cyclic coordinate descent over j = 0..K-1 (skipping i) with nonnegative
    soft-thresholding; stops once the KKT residual is <= cfg.tol.
    """
    X = np.asarray(X, dtype=float)
    N, K = X.shape
    if not 0 <= i < K:
        raise IndexError(f"target column {i} out of range for {K} columns")
    lam = float(cfg.lam)
    G = X.T @ X
    c = X.T @ X[:, i]
    xx = float(X[:, i] @ X[:, i])
    a = np.zeros(K)
    Ga = np.zeros(K)
    diag = np.diag(G).copy()
    coords = [j for j in range(K) if j != i and diag[j] > 0]

    def objective():
        # ||x - Xa||^2 = x.x - 2 c.a + a.G.a
        return xx - 2.0 * (c @ a) + a @ Ga + lam * a.sum()

    def residual():
        g = 2.0 * (Ga - c) + lam
        viol = np.where(a > 0, np.abs(g), np.maximum(-g, 0.0))
        viol[i] = 0.0
        return float(viol.max())

    history = [objective()]
    res = residual()
    it = 0
    while res > cfg.tol:
        if it >= cfg.max_iter:
            raise ConvergenceError(
                f"nonnegative LASSO did not converge in {cfg.max_iter} sweeps "
                f"(KKT residual {res:.3g} > tol {cfg.tol:.3g})", residual=res)
        for j in coords:
            # exact minimization in a_j given the others
            grad = 2.0 * (Ga[j] - c[j]) + lam
            new = max(0.0, a[j] - grad / (2.0 * diag[j]))
            delta = new - a[j]
            if delta != 0.0:
                a[j] = new
                Ga += delta * G[:, j]
        it += 1
        # refresh to keep incremental updates from drifting
        Ga = G @ a
        history.append(objective())
        res = residual()
    return SparseCode(a, history[-1], it, res, history)


def unit_norm_columns(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = np.linalg.norm(X, axis=0)
    return X / np.where(n > 0, n, 1.0)


def l1_graph(data, cfg: SolverConfig = SolverConfig()) -> SimilarityMatrix:
    """Symmetrized nonnegative sparse-coding graph W = (A + A^T) / 2.

    Rows of `data` (regions) are scaled to unit norm and used as the
    dictionary columns; row i of A codes region i over all other regions.
    """
    X = unit_norm_columns(np.asarray(data, dtype=float).T)
    K = X.shape[1]
    A = np.zeros((K, K))
    sweeps = []
    for i in range(K):
        try:
            code = solve_nonneg_lasso(X, i, cfg)
        except ConvergenceError as e:
            raise ConvergenceError(f"region {i}: {e}", residual=e.residual, region=i) from e
        A[i] = code.coefficients
        sweeps.append(code.iterations)
    log.debug("l1 graph: %d regions, sweeps min/max %d/%d", K, min(sweeps), max(sweeps))
    W = (A + A.T) / 2.0
    np.fill_diagonal(W, 0.0)
    return SimilarityMatrix(W, Method.L1GRAPH)
