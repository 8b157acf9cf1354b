"""On-disk artifacts: CSV matrices with JSON sidecars, diagrams, reports."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .data_model import read_matrix_csv, write_matrix_csv
from .learn import KernelMatrix
from .similarity import Method, SimilarityMatrix


def _atomic_write(path: Path, write):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    def w(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _atomic_write(Path(path), w)


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_matrix(path, values, meta: dict) -> None:
    """``path`` gets the headerless CSV, ``path.with_suffix('.json')`` the sidecar."""
    path = Path(path)
    _atomic_write(path, lambda tmp: write_matrix_csv(tmp, values))
    write_json(path.with_suffix(".json"), meta)


def read_matrix(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = read_json(path.with_suffix(".json"))
    return read_matrix_csv(path), meta


def save_similarity(path, m: SimilarityMatrix, **meta) -> None:
    write_matrix(path, m.values, {"method": m.method.value, "normalized": m.normalized, **meta})


def load_similarity(path) -> tuple[SimilarityMatrix, dict]:
    values, meta = read_matrix(path)
    return SimilarityMatrix(values, Method(meta["method"]), bool(meta["normalized"])), meta


def save_kernel(path, k: KernelMatrix, **meta) -> None:
    write_matrix(path, k.values, {"kind": k.kind, "normalized": k.normalized, **meta})


def load_kernel(path) -> tuple[KernelMatrix, dict]:
    values, meta = read_matrix(path)
    return KernelMatrix(values, meta["kind"], bool(meta["normalized"])), meta


def write_diagrams(path, diagrams) -> None:
    """Rows ``region,dimension,birth,death`` for per-region diagrams."""
    def w(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("region,dimension,birth,death\n")
            for region, (dim, pairs) in enumerate(diagrams):
                for b, d in np.asarray(pairs, dtype=float).reshape(-1, 2):
                    fh.write(f"{region},{dim},{float(b)!r},{float(d)!r}\n")
    _atomic_write(Path(path), w)


def read_diagrams(path, n_regions=None) -> list[np.ndarray]:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = n_regions if n_regions is not None else (int(rows[:, 0].max()) + 1 if len(rows) else 0)
    out = []
    for r in range(n):
        sel = rows[rows[:, 0] == r] if len(rows) else rows
        out.append(sel[:, 2:4].copy() if len(sel) else np.empty((0, 2)))
    return out


def data_hash(data: np.ndarray, extra: dict) -> str:
    h = hashlib.sha256()
    a = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    h.update(str(a.shape).encode())
    h.update(a.tobytes())
    h.update(json.dumps(extra, sort_keys=True).encode())
    return h.hexdigest()[:16]
