"""Run configuration: nested dataclasses, JSON loading, CLI overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

METHODS = ("correlation", "rbf", "pca", "l1", "persistence")
KERNELS = ("wl", "sp", "linear", "sum")


class ConfigError(ValueError):
    pass


@dataclass
class TDEConfig:
    m: int = 2
    tau: int = 3


@dataclass
class LassoConfig:
    lam: float = 0.1
    tol: float = 1e-6
    max_iter: int = 10000


@dataclass
class PDConfig:
    sigma: float = 0.5
    infinite: str = "drop"          # drop | cap
    traditional: str = "self"       # self | upper


@dataclass
class RBFConfig:
    gamma: float | str = "auto"


@dataclass
class PCAConfig:
    d: int = 10
    axis: str = "regions"           # regions | time


@dataclass
class RunConfig:
    method: str = "correlation"
    zscore: bool = True
    threshold: float = 0.5
    density: float | None = None
    wl_h: int = 3
    svm_c: float = 1.0
    c_grid: list | None = None
    kernel: str = "wl"
    sum_methods: list = field(default_factory=lambda: ["persistence", "l1"])
    sum_weights: list = field(default_factory=lambda: [0.5, 0.5])
    normalize_kernels: bool = True
    seed: int = 1
    manifest: str | None = None
    out: str = "out"
    tde: TDEConfig = field(default_factory=TDEConfig)
    lasso: LassoConfig = field(default_factory=LassoConfig)
    pd: PDConfig = field(default_factory=PDConfig)
    rbf: RBFConfig = field(default_factory=RBFConfig)
    pca: PCAConfig = field(default_factory=PCAConfig)

    def validate(self) -> "RunConfig":
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)
        need(self.method in METHODS, f"method must be one of {METHODS}, got {self.method!r}")
        need(self.kernel in KERNELS, f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        need(0.0 <= self.threshold <= 1.0, f"threshold must lie in [0, 1], got {self.threshold}")
        need(self.density is None or 0.0 < self.density < 1.0,
             f"density must lie in (0, 1), got {self.density}")
        need(self.wl_h >= 0, f"wl_h must be >= 0, got {self.wl_h}")
        need(self.svm_c > 0, f"svm_c must be positive, got {self.svm_c}")
        need(self.c_grid is None or all(c > 0 for c in self.c_grid), "c_grid values must be positive")
        need(self.tde.m >= 1 and self.tde.tau >= 1, "tde.m and tde.tau must be >= 1")
        need(self.lasso.lam >= 0 and self.lasso.tol > 0 and self.lasso.max_iter >= 1,
             "lasso needs lam >= 0, tol > 0, max_iter >= 1")
        need(self.pd.sigma > 0, f"pd.sigma must be positive, got {self.pd.sigma}")
        need(self.pd.infinite in ("drop", "cap"), "pd.infinite must be 'drop' or 'cap'")
        need(self.pd.traditional in ("upper", "self"), "pd.traditional must be 'upper' or 'self'")
        need(self.rbf.gamma == "auto" or (isinstance(self.rbf.gamma, (int, float)) and self.rbf.gamma > 0),
             "rbf.gamma must be 'auto' or a positive number")
        need(self.pca.d >= 1, "pca.d must be >= 1")
        need(self.pca.axis in ("regions", "time"), "pca.axis must be 'regions' or 'time'")
        need(all(m in METHODS for m in self.sum_methods), f"sum_methods must be drawn from {METHODS}")
        need(len(self.sum_weights) == len(self.sum_methods), "sum_weights must match sum_methods")
        need(all(w >= 0 for w in self.sum_weights) and abs(sum(self.sum_weights) - 1) <= 1e-12,
             "sum_weights must be nonnegative and sum to 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d, "").validate()

    def updated(self, overrides: dict) -> "RunConfig":
        """Apply dotted-key overrides such as {"lasso.lam": 0.2}."""
        d = self.to_dict()
        for key, val in overrides.items():
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = val
        return RunConfig.from_dict(d)

    def hash(self) -> str:
        return digest(self.to_dict())

    def build_dict(self) -> dict:
        """Fields that determine the similarity matrices of a method."""
        return {"zscore": self.zscore, "tde": dataclasses.asdict(self.tde),
                "lasso": dataclasses.asdict(self.lasso),
                "pd": {"sigma": self.pd.sigma, "infinite": self.pd.infinite},
                "rbf": dataclasses.asdict(self.rbf), "pca": dataclasses.asdict(self.pca)}

    def build_hash(self) -> str:
        return digest(self.build_dict())


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _build(cls, d, prefix):
    if not isinstance(d, dict):
        raise ConfigError(f"config section {prefix or '<root>'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    kw = {}
    for name, val in d.items():
        sub = _SECTIONS.get(name) if cls is RunConfig else None
        kw[name] = _build(sub, val, f"{name}.") if sub else val
    return cls(**kw)


_SECTIONS = {"tde": TDEConfig, "lasso": LassoConfig, "pd": PDConfig, "rbf": RBFConfig, "pca": PCAConfig}


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))
