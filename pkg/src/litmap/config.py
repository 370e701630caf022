"""Pipeline configuration: one flat key=value document.

Every tunable default of the pipeline lives here so a dataset's manifest can
embed a digest of the exact parameters that produced it.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    seed: int  # mandatory; no default on purpose
    embedding_dim: int = 256
    layout_method: str = "largevis"  # or "tsne"
    layout_knn_k: int = 15
    layout_perplexity: float = 10.0
    layout_negatives: int = 5
    layout_gamma: float = 7.0
    layout_rho0: float = 1.0
    layout_updates: int = 0  # 0 = 200 * n * k
    tsne_perplexity: float = 30.0
    tsne_iters: int = 1000
    cluster_min_samples: int = 5
    cluster_theta: float = 0.6
    cluster_quantiles: tuple[float, ...] = (0.005, 0.02, 0.08)
    label_k: int = 3
    bundle_grid: int = 256
    bundle_h0_frac: float = 0.05
    bundle_decay: float = 0.9
    bundle_iterations: int = 10
    bundle_step: float = 0.3
    bundle_smoothing: float = 0.5
    bundle_max_segment_frac: float = 0.02
    cocite_min_weight: int = 2

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.embedding_dim < 16:
            raise ConfigError("embedding_dim must be >= 16")
        if self.layout_method not in ("largevis", "tsne"):
            raise ConfigError(f"unknown layout_method {self.layout_method!r}")
        if self.layout_knn_k < 2:
            raise ConfigError("layout_knn_k must be >= 2")
        if not (1.0 < self.layout_perplexity <= self.layout_knn_k):
            raise ConfigError("layout_perplexity must be in (1, layout_knn_k]")
        if self.layout_negatives < 1:
            raise ConfigError("layout_negatives must be >= 1")
        for name in ("layout_gamma", "layout_rho0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.layout_updates < 0:
            raise ConfigError("layout_updates must be >= 0 (0 = auto)")
        if self.tsne_perplexity <= 1.0:
            raise ConfigError("tsne_perplexity must be > 1")
        if self.tsne_iters < 1:
            raise ConfigError("tsne_iters must be >= 1")
        if self.cluster_min_samples < 1:
            raise ConfigError("cluster_min_samples must be >= 1")
        if not (0.5 < self.cluster_theta <= 1.0):
            raise ConfigError("cluster_theta must be in (0.5, 1]")
        qs = self.cluster_quantiles
        if not qs or list(qs) != sorted(qs) or not all(0.0 < q < 1.0 for q in qs):
            raise ConfigError("cluster_quantiles must be ascending fractions in (0, 1)")
        if self.label_k < 1:
            raise ConfigError("label_k must be >= 1")
        if self.bundle_grid < 8:
            raise ConfigError("bundle_grid must be >= 8")
        if not (0.0 < self.bundle_decay <= 1.0):
            raise ConfigError("bundle_decay must be in (0, 1]")
        if self.bundle_iterations < 1:
            raise ConfigError("bundle_iterations must be >= 1")
        for name in ("bundle_h0_frac", "bundle_step", "bundle_smoothing", "bundle_max_segment_frac"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.cocite_min_weight < 1:
            raise ConfigError("cocite_min_weight must be >= 1")

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                rendered = ",".join(repr(v) for v in value)
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            lines.append(f"{f.name}={rendered}")
        return "\n".join(sorted(lines)) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def to_flat_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "PipelineConfig":
        raw: dict[str, str] = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {line_no}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
        if overrides:
            raw.update({k: str(v) for k, v in overrides.items()})
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "PipelineConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - set(fields))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "seed" not in raw:
            raise ConfigError("seed is mandatory")
        kwargs: dict = {}
        for key, text in raw.items():
            ftype = fields[key].type
            try:
                if key == "cluster_quantiles":
                    kwargs[key] = tuple(float(v) for v in text.split(",") if v.strip())
                elif ftype == "int":
                    kwargs[key] = int(text)
                elif ftype == "float":
                    kwargs[key] = float(text)
                else:
                    kwargs[key] = text
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {text!r}") from exc
        config = cls(**kwargs)
        config.validate()
        return config
