"""Kernel matrices, SMO-trained kernel SVMs and leave-one-out evaluation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import SeverityClass

log = logging.getLogger(__name__)

CLASSES = (SeverityClass.MILD, SeverityClass.MODERATE, SeverityClass.SEVERE)


class DegenerateKernelError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    kind: str = "kernel"
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {v.shape}")
        finite = np.isfinite(v)
        if finite.all():
            scale = max(1.0, float(np.abs(v).max(initial=0.0)))
            if not np.allclose(v, v.T, rtol=0, atol=1e-10 * scale):
                raise ValueError(f"{self.kind} kernel matrix is not symmetric")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def min_eig_ratio(self) -> float:
        """min eigenvalue / max |eigenvalue| (0 for the zero matrix)."""
        ev = np.linalg.eigvalsh((self.values + self.values.T) / 2)
        top = np.abs(ev).max()
        return float(ev.min() / top) if top > 0 else 0.0

    def is_psd(self, rel_tol: float = 1e-8) -> bool:
        return self.min_eig_ratio() >= -rel_tol

    def submatrix(self, idx) -> "KernelMatrix":
        idx = np.asarray(idx)
        return replace(self, values=self.values[np.ix_(idx, idx)])


def vectorize_upper(m) -> np.ndarray:
    """Strict upper triangle in row-major order: (m01, m02, ..., m12, ...)."""
    v = np.asarray(getattr(m, "values", m), dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {v.shape}")
    return v[np.triu_indices(v.shape[0], 1)]


def linear_kernel(features, kind: str = "linear") -> KernelMatrix:
    lens = {len(f) for f in features}
    if len(lens) > 1:
        raise ValueError(f"feature vectors differ in length: {sorted(lens)}")
    F = np.asarray(features, dtype=float)
    return KernelMatrix(F @ F.T, kind)


def normalize_kernel(k: KernelMatrix, ids=None) -> KernelMatrix:
    """k(a, b) / sqrt(k(a, a) k(b, b))."""
    d = np.diag(k.values).copy()
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        who = [ids[i] for i in bad] if ids is not None else bad.tolist()
        raise DegenerateKernelError(
            f"{k.kind} kernel has non-positive self-similarity for subjects {who}")
    s = np.sqrt(d)
    v = k.values / np.outer(s, s)
    v = (v + v.T) / 2
    np.fill_diagonal(v, 1.0)
    return KernelMatrix(v, k.kind, True)


def sum_kernel(kernels, weights=None, kind: str | None = None) -> KernelMatrix:
    """Convex combination of kernel matrices of equal size."""
    kernels = list(kernels)
    if not kernels:
        raise ValueError("no kernels to sum")
    if weights is None:
        weights = [1.0 / len(kernels)] * len(kernels)
    w = np.asarray(weights, dtype=float)
    if len(w) != len(kernels):
        raise ValueError(f"{len(kernels)} kernels but {len(w)} weights")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
        raise ValueError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
    sizes = {km.size for km in kernels}
    if len(sizes) != 1:
        raise ValueError(f"kernel sizes differ: {sorted(sizes)}")
    v = sum(wi * km.values for wi, km in zip(w, kernels))
    kind = kind or "sum(" + ",".join(km.kind for km in kernels) + ")"
    return KernelMatrix(v, kind, all(km.normalized for km in kernels))


# --- SVM --------------------------------------------------------------------

@dataclass
class SVMModel:
    alphas: np.ndarray
    bias: float
    y: np.ndarray
    C: float
    tag: str = ""
    objective: float = float("nan")
    kkt_gap: float = float("nan")
    iterations: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)

    @property
    def coef(self) -> np.ndarray:
        return self.alphas * self.y


def dual_objective(alphas, y, K) -> float:
    """sum(alpha) - 1/2 alpha^T Q alpha with Q = y y^T * K."""
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def train_svm(k, labels, C: float = 1.0, tol: float = 1e-3, max_iter: int = 100_000,
              tag: str = "") -> SVMModel:
    """Soft-margin kernel SVM dual solved by SMO.

    Working pair = maximal violating pair; stops when
    max_{I_up} -y G - min_{I_low} -y G <= tol.
    """
    K = np.asarray(getattr(k, "values", k), dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1/-1")
    if np.all(y == y[0]):
        raise ValueError("training labels contain a single class")
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    while True:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        gap = yg[i] - yg[j]
        if gap <= tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT gap {gap:.3g})", residual=gap)
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = 1e-12
        t = gap / a
        ti = C - alpha[i] if y[i] > 0 else alpha[i]
        tj = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, ti, tj)
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = old_i + y[i] * t
        alpha[j] = old_j - y[j] * t
        # snap to the box when the step hit a bound
        if t == ti:
            alpha[i] = C if y[i] > 0 else 0.0
        if t == tj:
            alpha[j] = 0.0 if y[j] > 0 else C
        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        it += 1
    bias = -_rho(alpha, y, grad, C)
    return SVMModel(alpha, bias, y, float(C), tag, dual_objective(alpha, y, K), float(gap), it)


def _rho(alpha, y, grad, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_ub = alpha >= C
    ub_set = (at_ub & (y < 0)) | (~at_ub & (y > 0))
    lb_set = (at_ub & (y > 0)) | (~at_ub & (y < 0))
    ub = yg[ub_set].min() if ub_set.any() else np.inf
    lb = yg[lb_set].max() if lb_set.any() else -np.inf
    return float((ub + lb) / 2)


def predict(model: SVMModel, kernel_row) -> float:
    """Decision value sum_i alpha_i y_i k(x_i, x) + b."""
    row = np.asarray(kernel_row, dtype=float)
    if row.shape != model.alphas.shape:
        raise ValueError(f"kernel row has length {row.size}, model was trained on {model.alphas.size}")
    sv = model.alphas > 0
    return float(model.coef[sv] @ row[sv] + model.bias)


def train_multiclass(k, labels, C: float = 1.0, **kw) -> list[SVMModel | float]:
    """One-vs-rest machines in class order; a constant decision replaces
    a machine whose binary problem has a single class."""
    labels = [SeverityClass(c) for c in labels]
    out = []
    for c in CLASSES:
        y = np.array([1.0 if lab == c else -1.0 for lab in labels])
        if np.all(y < 0):
            log.warning("class %s missing from training fold; its machine predicts -inf", c.label)
            out.append(-np.inf)
        elif np.all(y > 0):
            out.append(np.inf)
        else:
            out.append(train_svm(k, y, C, tag=f"{c.label}-vs-rest", **kw))
    return out


def multiclass_decisions(models, kernel_row) -> np.ndarray:
    return np.array([m if isinstance(m, float) else predict(m, kernel_row) for m in models])


def multiclass_predict(k, labels, C, test_rows) -> list[SeverityClass]:
    """Train one-vs-rest on `k`/`labels`; argmax decision per test row.
    Ties go to the earliest class (Mild < Moderate < Severe)."""
    models = train_multiclass(k, labels, C)
    rows = np.atleast_2d(np.asarray(test_rows, dtype=float))
    return [CLASSES[int(np.argmax(multiclass_decisions(models, r)))] for r in rows]


# --- evaluation ---------------------------------------------------------------

@dataclass
class EvalReport:
    ids: list
    true: list
    predicted: list
    decisions: np.ndarray
    config: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def confusion(self) -> np.ndarray:
        M = np.zeros((3, 3), dtype=int)
        for t, p in zip(self.true, self.predicted):
            M[int(t), int(p)] += 1
        return M

    @property
    def n_correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def accuracy(self) -> float:
        return 100.0 * self.n_correct / len(self.true)

    def to_dict(self) -> dict:
        return {
            "accuracy": round(self.accuracy, 2),
            "n_correct": self.n_correct,
            "n_subjects": len(self.true),
            "confusion": self.confusion.tolist(),
            "classes": [c.label for c in CLASSES],
            "flags": list(self.flags),
            "subjects": [
                {"id": sid, "true": SeverityClass(t).label, "predicted": SeverityClass(p).label,
                 "decision_values": [None if not np.isfinite(v) else float(v) for v in dv]}
                for sid, t, p, dv in zip(self.ids, self.true, self.predicted, self.decisions)
            ],
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        by_label = {c.label: c for c in CLASSES}
        subs = d["subjects"]
        dec = np.array([[np.nan if v is None else v for v in s["decision_values"]] for s in subs])
        return cls([s["id"] for s in subs], [by_label[s["true"]] for s in subs],
                   [by_label[s["predicted"]] for s in subs], dec, d.get("config", {}),
                   d.get("flags", []))


def fit_fold(kernel, labels, test: int, C: float = 1.0, **kw):
    """Train on every subject but `test` and score `test`.

    Returns ``(decision values, test kernel row)``; the test row and column
    never reach the trainer.
    """
    K = np.asarray(getattr(kernel, "values", kernel), dtype=float)
    L = K.shape[0]
    train = np.array([i for i in range(L) if i != test])
    models = train_multiclass(K[np.ix_(train, train)], [labels[i] for i in train], C, **kw)
    row = K[test, train]
    return multiclass_decisions(models, row), row


def _inner_best_c(K, labels, c_grid, **kw) -> float:
    best, best_acc = None, -1
    for C in c_grid:
        correct = 0
        for t in range(len(labels)):
            dec, _ = fit_fold(K, labels, t, C, **kw)
            correct += CLASSES[int(np.argmax(dec))] == labels[t]
        if correct > best_acc:
            best, best_acc = C, correct
    return best


def loo_evaluate(kernel, labels, C: float = 1.0, ids=None, config=None, c_grid=None,
                 **kw) -> EvalReport:
    """Leave-one-out one-vs-rest SVM evaluation over a precomputed kernel.

    With `c_grid`, C is chosen per outer fold by an inner leave-one-out on
    that fold's training subjects.
    """
    K = np.asarray(getattr(kernel, "values", kernel), dtype=float)
    labels = [SeverityClass(c) for c in labels]
    L = len(labels)
    if L < 3:
        raise ValueError(f"leave-one-out needs at least 3 subjects, got {L}")
    if K.shape != (L, L):
        raise ValueError(f"kernel shape {K.shape} does not match {L} labels")
    ids = list(ids) if ids is not None else [str(i) for i in range(L)]
    preds, decs, zero_rows, chosen = [], [], 0, []
    for t in range(L):
        fold_c = C
        if c_grid:
            train = [i for i in range(L) if i != t]
            fold_c = _inner_best_c(K[np.ix_(train, train)], [labels[i] for i in train], c_grid, **kw)
            chosen.append(fold_c)
        try:
            dec, row = fit_fold(K, labels, t, fold_c, **kw)
        except (ConvergenceError, ValueError) as e:
            raise type(e)(f"fold {t} (subject {ids[t]}): {e}") from e
        zero_rows += not np.any(row)
        decs.append(dec)
        preds.append(CLASSES[int(np.argmax(dec))])
    flags = []
    if zero_rows == L:
        flags.append("uninformative kernel")
    cfg = dict(config or {})
    cfg.setdefault("C", C)
    if c_grid:
        cfg["c_grid"] = list(c_grid)
        cfg["c_chosen"] = chosen
    return EvalReport(ids, labels, preds, np.array(decs), cfg, flags)
