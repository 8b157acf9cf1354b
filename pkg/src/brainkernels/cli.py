"""Command-line front end: synth, build-graphs, compute-kernel, evaluate, report."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .artifacts import (data_hash, load_similarity, read_diagrams, read_json, save_kernel,
                        save_similarity, write_diagrams, write_json)
from .config import KERNELS, METHODS, ConfigError, RunConfig, load_config
from .data_model import generate_synthetic_cohort, load_manifest, write_manifest, write_matrix_csv

log = logging.getLogger("brainkernels")


class ArtifactError(RuntimeError):
    pass


# --- helpers -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:g}"


def parse_sweep(spec: str) -> list[float]:
    """``a:b:step`` -> [a, a+step, ..., b] (inclusive, rounded to 1e-9)."""
    try:
        a, b, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--sweep-threshold expects a:b:step, got {spec!r}") from None
    if step <= 0 or b < a:
        raise ConfigError(f"invalid sweep {spec!r}: need step > 0 and b >= a")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 9) for i in range(n)]


def graph_dir(cfg: RunConfig, method: str) -> Path:
    return Path(cfg.out) / "graphs" / method


def _methods(cfg: RunConfig) -> list[str]:
    return list(cfg.sum_methods) if cfg.kernel == "sum" else [cfg.method]


def _feature_name(methods) -> str:
    return methods[0] if len(methods) == 1 else "sum-" + "-".join(methods)


def _cohort(cfg: RunConfig):
    if not cfg.manifest:
        raise ConfigError("no manifest given (use --manifest or the config's 'manifest')")
    return load_manifest(cfg.manifest)


# --- commands ------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, L: int, K: int, N: int) -> Path:
    cohort = generate_synthetic_cohort(cfg.seed, L, K, N)
    out = Path(cfg.out)
    (out / "data").mkdir(parents=True, exist_ok=True)
    rows = []
    for s in cohort:
        rel = f"data/{s.id}.csv"
        write_matrix_csv(out / rel, s.data)
        rows.append((s.id, s.site, s.ados, rel))
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    log.info("wrote %d subjects and %s", len(rows), manifest)
    return manifest


def cmd_build_graphs(cfg: RunConfig, method: str | None = None) -> dict:
    """Normalized similarity matrix per subject, cached by content hash."""
    method = method or cfg.method
    cohort = _cohort(cfg)
    gdir = graph_dir(cfg, method)
    gdir.mkdir(parents=True, exist_ok=True)
    build_hash, config_hash = cfg.build_hash(), cfg.hash()
    built = skipped = 0
    for s in cohort:
        chash = data_hash(s.data, {"method": method, "build": cfg.build_dict()})
        path = gdir / f"{s.id}.csv"
        meta_path = path.with_suffix(".json")
        if path.exists() and meta_path.exists() and read_json(meta_path).get("content_hash") == chash:
            skipped += 1
            continue
        try:
            diagrams = pl.subject_diagrams(s.data, cfg) if method == "persistence" else None
            m = pl.build_similarity(s.data, cfg, method, diagrams)
        except Exception as e:
            raise ArtifactError(f"subject {s.id}: {e}") from e
        if diagrams is not None:
            write_diagrams(gdir / f"{s.id}.diagrams.csv", [(1, d) for d in diagrams])
        save_similarity(path, m, subject=s.id, content_hash=chash, build_hash=build_hash,
                        config_hash=config_hash)
        built += 1
    if skipped:
        log.info("skipped %d subjects (cached)", skipped)
    log.info("built %d %s graphs in %s", built, method, gdir)
    return {"built": built, "skipped": skipped, "dir": str(gdir)}


def load_graphs(cfg: RunConfig, methods, cohort, build_missing: bool):
    """Similarity matrices (and diagrams for persistence) for each method.

    With `build_missing` the build step runs first (cached); otherwise
    missing artifacts are reported together.
    Artifacts built under another configuration are rejected.
    """
    if build_missing:
        # cached: only new or stale subjects are rebuilt
        for m in methods:
            cmd_build_graphs(cfg, m)
    missing = [f"{graph_dir(cfg, m) / (s.id + '.csv')}" for m in methods for s in cohort
               if not (graph_dir(cfg, m) / f"{s.id}.csv").exists()]
    if missing:
        raise ArtifactError("missing graph artifacts (run build-graphs first):\n  " + "\n  ".join(missing))
    want = cfg.build_hash()
    mats, dgms = {}, {}
    for m in methods:
        mats[m] = []
        for s in cohort:
            sim, meta = load_similarity(graph_dir(cfg, m) / f"{s.id}.csv")
            if meta.get("build_hash") != want:
                raise ArtifactError(
                    f"{graph_dir(cfg, m) / (s.id + '.csv')} was built with configuration "
                    f"{meta.get('build_hash')}, current is {want}; refusing to mix artifacts")
            chash = data_hash(s.data, {"method": m, "build": cfg.build_dict()})
            if meta.get("content_hash") != chash:
                raise ArtifactError(f"{graph_dir(cfg, m) / (s.id + '.csv')} is stale for subject {s.id}")
            mats[m].append(sim)
        if m == "persistence" and cfg.pd.traditional == "self":
            K = cohort.n_regions
            dgms[m] = [read_diagrams(graph_dir(cfg, m) / f"{s.id}.diagrams.csv", K) for s in cohort]
    return mats, dgms


def _thresholds(cfg: RunConfig, sweep: str | None):
    if sweep:
        return parse_sweep(sweep)
    return [None]


def _tag(cfg: RunConfig, threshold) -> str:
    if threshold is None and cfg.density is not None:
        return f"d{_fmt(cfg.density)}"
    return f"t{_fmt(cfg.threshold if threshold is None else threshold)}"


def cmd_compute_kernel(cfg: RunConfig, sweep: str | None = None) -> list[Path]:
    cohort = _cohort(cfg)
    methods = _methods(cfg)
    mats, dgms = load_graphs(cfg, methods, cohort, build_missing=cfg.kernel != "sum")
    feature = _feature_name(methods)
    kdir = Path(cfg.out) / "kernels"
    written = []
    for thr in _thresholds(cfg, sweep):
        parts = {"linear": [], "wl": [], "sp": []}
        tables = {}
        for m in methods:
            parts["linear"].append(pl.traditional_kernel(mats[m], cfg, m, cohort.ids, dgms.get(m)))
            wl, sp, table = pl.graph_kernels(mats[m], cfg, m, thr, cohort.ids)
            parts["wl"].append(wl)
            parts["sp"].append(sp)
            tables[m] = table.to_list()
        kinds = ["linear", "wl", "sp"] if cfg.kernel == "sum" else [cfg.kernel]
        for kind in kinds:
            k = pl.combine(parts[kind], cfg, methods)
            tag = "" if kind == "linear" else "_" + _tag(cfg, thr)
            path = kdir / f"{feature}_{kind}{tag}.csv"
            meta = {"kernel": kind, "source_methods": methods, "wl_h": cfg.wl_h,
                    "threshold": None if kind == "linear" else (cfg.threshold if thr is None else thr),
                    "density": cfg.density, "subjects": cohort.ids,
                    "config_hash": cfg.hash(), "build_hash": cfg.build_hash()}
            save_kernel(path, k, **meta)
            if kind == "wl":
                write_json(path.with_suffix(".labels.json"), tables)
            written.append(path)
            log.info("wrote %s", path)
    return written


def cmd_evaluate(cfg: RunConfig, sweep: str | None = None) -> list[Path]:
    cohort = _cohort(cfg)
    methods = _methods(cfg)
    mats, dgms = load_graphs(cfg, methods, cohort, build_missing=cfg.kernel != "sum")
    feature = _feature_name(methods)
    rdir = Path(cfg.out) / "reports"
    written = []
    for thr in _thresholds(cfg, sweep):
        result = pl.evaluate(cohort, mats, cfg, thr, dgms)
        path = rdir / f"{feature}_{_tag(cfg, thr)}.json"
        write_json(path, result)
        log.info("%s %s: traditional %.2f%%, graph kernel %.2f%% (%s); wrote %s", feature,
                 _tag(cfg, thr), result["traditional"]["accuracy"], result["graph_kernel"]["accuracy"],
                 result["graph_kernel"]["best"], path)
        written.append(path)
    return written


def cmd_report(cfg: RunConfig) -> str:
    """Tabulate every evaluation report as a Traditional vs Graph Kernel table."""
    rdir = Path(cfg.out) / "reports"
    files = sorted(rdir.glob("*.json"))
    if not files:
        raise ArtifactError(f"no reports in {rdir}; run evaluate first")
    rows = []
    for f in files:
        r = read_json(f)
        g = r["graph_kernel"]
        thr = r["threshold"] if r["threshold"] is not None else f"density {r['density']}"
        rows.append([r["feature"], str(thr), r["n_subjects"], f"{r['traditional']['accuracy']:.2f}",
                     f"{g['accuracy']:.2f}", g["best"].upper(), f"{g['wl']['accuracy']:.2f}",
                     f"{g['sp']['accuracy']:.2f}"])
    head = ["Feature", "Threshold", "L", "Traditional Kernel", "Graph Kernel", "Best", "WL", "SP"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    table = "\n".join(lines) + "\n"
    out = Path(cfg.out)
    (out / "report.md").write_text(table, encoding="utf-8")
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        w.writerows(rows)
    return table


# --- argument parsing ---------------------------------------------------------------

_FLAG_KEYS = {
    "method": "method", "threshold": "threshold", "density": "density", "wl_h": "wl_h",
    "svm_c": "svm_c", "c_grid": "c_grid", "kernel": "kernel", "sum_methods": "sum_methods",
    "sum_weights": "sum_weights", "seed": "seed", "manifest": "manifest", "out": "out",
    "zscore": "zscore", "normalize_kernels": "normalize_kernels",
    "tde_m": "tde.m", "tde_tau": "tde.tau", "pssk_sigma": "pd.sigma", "pd_infinite": "pd.infinite",
    "pd_traditional": "pd.traditional", "lasso_lambda": "lasso.lam", "lasso_tol": "lasso.tol",
    "lasso_max_iter": "lasso.max_iter", "rbf_gamma": "rbf.gamma", "pca_d": "pca.d",
    "pca_axis": "pca.axis",
}


def _gamma(v: str):
    return v if v == "auto" else float(v)


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration (overrides --config)")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--manifest", help="subject manifest CSV")
    g.add_argument("--method", choices=METHODS)
    g.add_argument("--threshold", type=float)
    g.add_argument("--density", type=float, help="per-subject edge-density target instead of a threshold")
    g.add_argument("--zscore", dest="zscore", action="store_true", default=None)
    g.add_argument("--no-zscore", dest="zscore", action="store_false")
    g.add_argument("--tde-m", type=int)
    g.add_argument("--tde-tau", type=int)
    g.add_argument("--pssk-sigma", type=float)
    g.add_argument("--pd-infinite", choices=["drop", "cap"])
    g.add_argument("--pd-traditional", choices=["upper", "self"])
    g.add_argument("--lasso-lambda", type=float)
    g.add_argument("--lasso-tol", type=float)
    g.add_argument("--lasso-max-iter", type=int)
    g.add_argument("--rbf-gamma", type=_gamma)
    g.add_argument("--pca-d", type=int)
    g.add_argument("--pca-axis", choices=["regions", "time"])
    g.add_argument("--wl-h", type=int)
    g.add_argument("--svm-c", type=float)
    g.add_argument("--c-grid", type=float, nargs="+")
    g.add_argument("--kernel", choices=KERNELS)
    g.add_argument("--sum-methods", nargs="+", choices=METHODS)
    g.add_argument("--sum-weights", type=float, nargs="+")
    g.add_argument("--normalize-kernels", dest="normalize_kernels", action="store_true", default=None)
    g.add_argument("--raw-kernels", dest="normalize_kernels", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brainkernels", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic cohort (manifest + matrices)")
    _add_config_flags(s)
    s.add_argument("--L", type=int, default=30, help="subjects")
    s.add_argument("--K", type=int, default=12, help="regions")
    s.add_argument("--N", type=int, default=200, help="time samples")

    b = sub.add_parser("build-graphs", help="per-subject normalized similarity matrices")
    _add_config_flags(b)

    k = sub.add_parser("compute-kernel", help="subject-by-subject kernel matrices")
    _add_config_flags(k)
    k.add_argument("--sweep-threshold", metavar="a:b:step")

    e = sub.add_parser("evaluate", help="LOO traditional vs graph-kernel comparison")
    _add_config_flags(e)
    e.add_argument("--sweep-threshold", metavar="a:b:step")

    r = sub.add_parser("report", help="tabulate evaluation reports")
    _add_config_flags(r)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for attr, key in _FLAG_KEYS.items():
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = val
    if "sum_methods" in overrides and "sum_weights" not in overrides:
        n = len(overrides["sum_methods"])
        overrides["sum_weights"] = [1.0 / n] * n
    if overrides.get("density") is not None and "threshold" in overrides:
        raise ConfigError("--threshold and --density are mutually exclusive")
    return cfg.updated(overrides) if overrides else cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            cmd_synth(cfg, args.L, args.K, args.N)
        elif args.command == "build-graphs":
            cmd_build_graphs(cfg)
        elif args.command == "compute-kernel":
            cmd_compute_kernel(cfg, args.sweep_threshold)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.sweep_threshold)
        elif args.command == "report":
            sys.stdout.write(cmd_report(cfg))
    except (ConfigError, ArtifactError, ValueError, OSError, RuntimeError) as e:
        log.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
