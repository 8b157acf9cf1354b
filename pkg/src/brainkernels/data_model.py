"""Subject records, manifests, severity binning and synthetic cohorts."""

from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class SeverityClass(enum.IntEnum):
    MILD = 0
    MODERATE = 1
    SEVERE = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    site: str
    ados: int
    data: np.ndarray = field(repr=False)
    # region -> block index; only set for synthetic subjects
    blocks: tuple[int, ...] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise DataError(f"subject {self.id}: data must be 2-D (regions x time), got {data.ndim}-D")
        K, N = data.shape
        if K < 2 or N < 2:
            raise DataError(f"subject {self.id}: need at least 2 regions and 2 samples, got {K}x{N}")
        if not np.all(np.isfinite(data)):
            raise DataError(f"subject {self.id}: non-finite entries in data")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def severity(self) -> SeverityClass:
        return bin_ados(self.ados)


@dataclass(frozen=True)
class Cohort:
    subjects: tuple[SubjectRecord, ...]

    def __post_init__(self):
        subjects = tuple(self.subjects)
        if not subjects:
            raise DataError("empty cohort")
        seen = set()
        for s in subjects:
            if s.id in seen:
                raise DataError(f"duplicate subject id {s.id!r}")
            seen.add(s.id)
        first = subjects[0]
        for s in subjects[1:]:
            if s.n_regions != first.n_regions:
                raise DataError(
                    f"shape mismatch: subject {first.id!r} has {first.n_regions} regions, "
                    f"subject {s.id!r} has {s.n_regions}"
                )
        object.__setattr__(self, "subjects", subjects)

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    def __getitem__(self, i):
        return self.subjects[i]

    @property
    def n_regions(self) -> int:
        return self.subjects[0].n_regions

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @property
    def labels(self) -> list[SeverityClass]:
        return [s.severity for s in self.subjects]


MANIFEST_HEADER = ["subject_id", "site", "ados", "path"]


def read_matrix_csv(path) -> np.ndarray:
    """Headerless CSV of reals, one row per region."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"matrix file not found: {path}")
    m = np.loadtxt(path, delimiter=",", ndmin=2)
    return m


def write_matrix_csv(path, m: np.ndarray) -> None:
    # repr precision round-trips float64 exactly
    np.savetxt(path, np.asarray(m, dtype=float), delimiter=",", fmt="%.17g")


def load_manifest(path) -> Cohort:
    """Load a cohort from a ``subject_id,site,ados,path`` manifest.

    Matrix paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent
    subjects = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty cohort")
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise DataError(f"{path}: expected header {','.join(MANIFEST_HEADER)}, got {','.join(header)}")
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}: row {rowno}: expected 4 fields, got {len(row)}")
            sid, site, ados, rel = (c.strip() for c in row)
            try:
                score = int(ados)
            except ValueError:
                raise DataError(f"{path}: row {rowno}: ADOS score {ados!r} is not an integer") from None
            mpath = Path(rel)
            if not mpath.is_absolute():
                mpath = base / mpath
            subjects.append(SubjectRecord(sid, site, score, read_matrix_csv(mpath)))
    if not subjects:
        raise DataError("empty cohort")
    return Cohort(tuple(subjects))


def write_manifest(path, rows) -> None:
    """Write manifest rows ``(subject_id, site, ados, relpath)``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in rows:
            w.writerow(r)


def bin_ados(score: int) -> SeverityClass:
    """Mild 0-8, Moderate 9-13, Severe 14 and above."""
    if score < 0:
        raise ValueError(f"ADOS score must be nonnegative, got {score}")
    if score <= 8:
        return SeverityClass.MILD
    if score <= 13:
        return SeverityClass.MODERATE
    return SeverityClass.SEVERE


def znormalize(series) -> tuple[np.ndarray, bool]:
    """Zero-mean, unit (population) std. Returns ``(z, is_constant)``."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("znormalize needs a 1-D series of length >= 2")
    mu = x.mean()
    sd = x.std()
    if sd == 0 or not np.isfinite(sd) or sd <= 1e-14 * max(1.0, abs(mu)):
        return np.zeros_like(x), True
    return (x - mu) / sd, False


def znormalize_rows(data: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Row-wise :func:`znormalize`; also returns indices of constant rows."""
    out = np.empty_like(np.asarray(data, dtype=float))
    flat = []
    for k, row in enumerate(np.asarray(data, dtype=float)):
        out[k], const = znormalize(row)
        if const:
            flat.append(k)
    return out, flat


# --- synthetic cohorts -------------------------------------------------------

_ADOS_RANGE = {
    SeverityClass.MILD: (0, 8),
    SeverityClass.MODERATE: (9, 13),
    SeverityClass.SEVERE: (14, 22),
}


def _partitions(n, parts, min_part):
    """Non-increasing integer partitions of n into exactly `parts` parts."""
    def rec(n, parts, cap):
        if parts == 1:
            if min_part <= n <= cap:
                yield (n,)
            return
        for first in range(min(cap, n - min_part * (parts - 1)), min_part - 1, -1):
            for rest in rec(n - first, parts - 1, first):
                yield (first,) + rest
    yield from rec(n, parts, n)


def block_patterns(K: int) -> list[tuple[int, ...]]:
    """Three block-size patterns over K regions, one per class.

    Patterns have 2-4 blocks and near-equal within-block pair counts, so the
    classes differ in how connectivity is arranged rather than in how much
    of it there is.
    """
    min_part = 2 if K >= 6 else 1
    cands = []
    for p in range(2, 5):
        for part in _partitions(K, p, min_part):
            if max(part) >= 2:
                cands.append(part)
    cands = sorted(set(cands), key=lambda b: (-sum(x * (x - 1) // 2 for x in b), b))
    if len(cands) < 3:
        raise ValueError(f"cannot build three block patterns for K={K}")
    pairs = [sum(x * (x - 1) // 2 for x in b) for b in cands]
    best = min(range(len(cands) - 2), key=lambda i: (pairs[i] - pairs[i + 2], i))
    return [cands[best], cands[best + 1], cands[best + 2]]


def generate_synthetic_cohort(seed: int, L: int, K: int, N: int, classes: int = 3,
                              noise: float = 0.7) -> Cohort:
    """Cohort with class-specific block connectivity.

    Each class has its own block-size pattern (:func:`block_patterns`).
    Regions in a block share one latent AR(1) signal plus independent
    Gaussian noise of std `noise`. Region-to-block assignment is permuted
    per subject, so only permutation-invariant comparisons see the class.
    """
    if classes != 3:
        raise ValueError("only 3 classes are supported")
    if L < 3 or K < 4 or N < 20:
        raise ValueError(f"need L >= 3, K >= 4, N >= 20; got L={L}, K={K}, N={N}")
    rng = np.random.default_rng(seed)
    patterns = block_patterns(K)
    order = rng.permutation(np.arange(L) % 3)
    subjects = []
    for ell in range(L):
        cls = SeverityClass(int(order[ell]))
        sizes = patterns[cls]
        assign = np.repeat(np.arange(len(sizes)), sizes)
        assign = assign[rng.permutation(K)]
        latent = np.empty((len(sizes), N))
        for b in range(len(sizes)):
            e = rng.standard_normal(N)
            s = np.empty(N)
            s[0] = e[0]
            for t in range(1, N):
                s[t] = 0.5 * s[t - 1] + np.sqrt(1 - 0.25) * e[t]
            latent[b] = s
        data = latent[assign] + noise * rng.standard_normal((K, N))
        lo, hi = _ADOS_RANGE[cls]
        ados = int(rng.integers(lo, hi + 1))
        subjects.append(SubjectRecord(f"sub{ell:03d}", "SYNTH", ados, data,
                                      blocks=tuple(int(a) for a in assign)))
    return Cohort(tuple(subjects))


def within_cross_correlation(subject: SubjectRecord) -> tuple[float, float]:
    """Mean Pearson correlation over within-block and cross-block pairs."""
    if subject.blocks is None:
        raise ValueError("subject has no block assignment")
    c = np.corrcoef(subject.data)
    within, cross = [], []
    for i, j in itertools.combinations(range(subject.n_regions), 2):
        (within if subject.blocks[i] == subject.blocks[j] else cross).append(c[i, j])
    return float(np.mean(within)), float(np.mean(cross))
