"""End-to-end stages: similarity matrices, kernels and LOO comparison."""

from __future__ import annotations

import logging

import numpy as np

from . import graph_kernels as gk
from .config import RunConfig
from .data_model import Cohort, znormalize_rows
from .learn import KernelMatrix, linear_kernel, loo_evaluate, normalize_kernel, sum_kernel, vectorize_upper
from .similarity import (SimilarityMatrix, normalize_unit_interval, pca_rbf_similarity,
                         pearson_similarity, rbf_similarity)
from .sparse_graph import SolverConfig, l1_graph
from .topology import persistence_similarity, pssk, region_diagrams

log = logging.getLogger(__name__)


def raw_similarity(data, cfg: RunConfig, method: str, diagrams=None) -> SimilarityMatrix:
    """Unnormalized K x K similarity of one subject's data under `method`."""
    X = np.asarray(data, dtype=float)
    if cfg.zscore:
        X, flat = znormalize_rows(X)
        if flat:
            log.warning("constant series in regions %s", flat)
    if method == "correlation":
        return pearson_similarity(X)
    if method == "rbf":
        return rbf_similarity(X, cfg.rbf.gamma)
    if method == "pca":
        return pca_rbf_similarity(X, min(cfg.pca.d, *X.shape), cfg.rbf.gamma, cfg.pca.axis)
    if method == "l1":
        return l1_graph(X, SolverConfig(cfg.lasso.lam, cfg.lasso.tol, cfg.lasso.max_iter))
    if method == "persistence":
        if diagrams is None:
            diagrams = region_diagrams(X, cfg.tde.m, cfg.tde.tau, cfg.pd.infinite)
        return persistence_similarity(X, sigma=cfg.pd.sigma, diagrams=diagrams)
    raise ValueError(f"unknown method {method!r}")


def subject_diagrams(data, cfg: RunConfig):
    X = np.asarray(data, dtype=float)
    if cfg.zscore:
        X, _ = znormalize_rows(X)
    return region_diagrams(X, cfg.tde.m, cfg.tde.tau, cfg.pd.infinite)


def build_similarity(data, cfg: RunConfig, method: str, diagrams=None) -> SimilarityMatrix:
    return normalize_unit_interval(raw_similarity(data, cfg, method, diagrams))


def build_cohort(cohort: Cohort, cfg: RunConfig, method: str) -> list[SimilarityMatrix]:
    out = []
    for s in cohort:
        try:
            out.append(build_similarity(s.data, cfg, method))
        except Exception as e:
            raise type(e)(f"subject {s.id}: {e}") from e
    return out


def thresholds_for(mats, cfg: RunConfig, threshold=None) -> list[float]:
    """Per-subject thresholds: fixed, or chosen to hit `cfg.density`."""
    if cfg.density is not None and threshold is None:
        return [gk.density_threshold(m, cfg.density) for m in mats]
    t = cfg.threshold if threshold is None else threshold
    return [t] * len(mats)


def graphs_for(mats, cfg: RunConfig, threshold=None) -> list[gk.LabeledGraph]:
    return [gk.binarize(m, t) for m, t in zip(mats, thresholds_for(mats, cfg, threshold))]


def traditional_features(mats, cfg: RunConfig, method: str, diagrams=None) -> np.ndarray:
    if method == "persistence" and cfg.pd.traditional == "self":
        if diagrams is None:
            raise ValueError("self-kernel features need the per-region diagrams")
        return np.array([[pssk(d, d, cfg.pd.sigma) for d in dg] for dg in diagrams])
    return np.array([vectorize_upper(m) for m in mats])


def _maybe_normalize(k: KernelMatrix, cfg, ids) -> KernelMatrix:
    return normalize_kernel(k, ids) if cfg.normalize_kernels else k


def traditional_kernel(mats, cfg: RunConfig, method: str, ids=None, diagrams=None) -> KernelMatrix:
    k = linear_kernel(traditional_features(mats, cfg, method, diagrams), kind=f"linear:{method}")
    return _maybe_normalize(k, cfg, ids)


def graph_kernels(mats, cfg: RunConfig, method: str, threshold=None, ids=None):
    """WL and SP kernels of the thresholded graphs, plus the WL label table."""
    graphs = graphs_for(mats, cfg, threshold)
    feats, table = gk.wl_features(graphs, cfg.wl_h)
    wl = KernelMatrix(gk._gram(feats), f"wl:{method}")
    sp = KernelMatrix(gk.sp_kernel(graphs), f"sp:{method}")
    return _maybe_normalize(wl, cfg, ids), _maybe_normalize(sp, cfg, ids), table


def combine(kernels, cfg: RunConfig, methods) -> KernelMatrix:
    if len(kernels) == 1:
        return kernels[0]
    w = cfg.sum_weights if list(methods) == list(cfg.sum_methods) else None
    return sum_kernel(kernels, w)


def evaluate(cohort: Cohort, mats_by_method: dict, cfg: RunConfig, threshold=None,
             diagrams_by_method=None) -> dict:
    """Traditional vs graph-kernel LOO accuracy for one feature row.

    `mats_by_method` maps method -> per-subject normalized similarity
    matrices; several methods are fused with `sum_kernel`.
    """
    methods = list(mats_by_method)
    ids = cohort.ids
    labels = cohort.labels
    diagrams_by_method = diagrams_by_method or {}
    trad, wls, sps = [], [], []
    for m in methods:
        mats = mats_by_method[m]
        trad.append(traditional_kernel(mats, cfg, m, ids, diagrams_by_method.get(m)))
        wl, sp, _ = graph_kernels(mats, cfg, m, threshold, ids)
        wls.append(wl)
        sps.append(sp)
    snapshot = cfg.to_dict()
    thr = cfg.threshold if threshold is None else threshold
    snapshot["threshold"] = thr if cfg.density is None or threshold is not None else None
    kw = dict(C=cfg.svm_c, ids=ids, c_grid=cfg.c_grid)
    r_trad = loo_evaluate(combine(trad, cfg, methods), labels, config={**snapshot, "kernel": "linear"}, **kw)
    r_wl = loo_evaluate(combine(wls, cfg, methods), labels, config={**snapshot, "kernel": "wl"}, **kw)
    r_sp = loo_evaluate(combine(sps, cfg, methods), labels, config={**snapshot, "kernel": "sp"}, **kw)
    best = "wl" if r_wl.accuracy >= r_sp.accuracy else "sp"
    feature = methods[0] if len(methods) == 1 else "sum(" + ",".join(methods) + ")"
    return {
        "feature": feature,
        "threshold": snapshot["threshold"],
        "density": cfg.density,
        "n_subjects": len(cohort),
        "traditional": r_trad.to_dict(),
        "graph_kernel": {
            "best": best,
            "accuracy": max(round(r_wl.accuracy, 2), round(r_sp.accuracy, 2)),
            "wl": r_wl.to_dict(),
            "sp": r_sp.to_dict(),
        },
        "config": snapshot,
        "config_hash": cfg.hash(),
        "build_hash": cfg.build_hash(),
    }
