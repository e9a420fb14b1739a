"""Engine configuration: a TOML file validated up front, with CLI and
environment-variable overrides applied by the interface layer."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .pathology import ThresholdConfig

ENV_CONFIG = "KGRAG_CONFIG"

MAX_K = 64

DEFAULT_LABELS = (
    "Lung Lesion", "Lung Opacity", "Pleural Effusion", "Pneumonia",
    "Atelectasis", "Edema", "Consolidation", "Pneumothorax", "Cardiomegaly",
    "Fracture",
)


@dataclass
class EngineConfig:
    datastore_path: Optional[Path] = None
    embeddings_path: Optional[Path] = None
    index_path: Optional[Path] = None
    weights_path: Optional[Path] = None
    k: int = 7
    style: str = "kg"
    strict: bool = True
    thresholds: ThresholdConfig = field(
        default_factory=lambda: ThresholdConfig(labels=DEFAULT_LABELS))
    backend_url: Optional[str] = None
    backend_timeout_ms: int = 30_000
    service_host: str = "127.0.0.1"
    service_port: int = 8080
    log_level: str = "info"

    def validate(self, require_paths: tuple[str, ...] = ()) -> None:
        if not 1 <= self.k <= MAX_K:
            raise ConfigError(f"k must be in 1..{MAX_K}, got {self.k}")
        if self.style not in ("kg", "nle", "none"):
            raise ConfigError(f"style must be kg/nle/none, got {self.style!r}")
        if self.backend_timeout_ms < 1:
            raise ConfigError("backend timeout must be positive")
        for name in require_paths:
            path = getattr(self, f"{name}_path")
            if path is None:
                raise ConfigError(f"missing required path: {name}")
            if not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")


def load_config(path: Optional[str] = None) -> EngineConfig:
    """Load a TOML config; falls back to $KGRAG_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    cfg = EngineConfig()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None

    paths = data.get("paths", {})
    for key in ("datastore", "embeddings", "index", "weights"):
        if key in paths:
            setattr(cfg, f"{key}_path", Path(paths[key]))
    retrieval = data.get("retrieval", {})
    cfg.k = int(retrieval.get("k", cfg.k))
    cfg.style = retrieval.get("style", cfg.style)
    evaluation = data.get("evaluation", {})
    cfg.strict = bool(evaluation.get("strict", cfg.strict))
    thresholds = data.get("thresholds", {})
    cfg.thresholds = ThresholdConfig(
        theta_neg=float(thresholds.get("theta_neg", cfg.thresholds.theta_neg)),
        theta_pos=float(thresholds.get("theta_pos", cfg.thresholds.theta_pos)),
        labels=tuple(thresholds.get("labels", cfg.thresholds.labels)))
    backend = data.get("backend", {})
    cfg.backend_url = backend.get("url", cfg.backend_url)
    cfg.backend_timeout_ms = int(backend.get("timeout_ms", cfg.backend_timeout_ms))
    service = data.get("service", {})
    cfg.service_host = service.get("host", cfg.service_host)
    cfg.service_port = int(service.get("port", cfg.service_port))
    cfg.log_level = service.get("log_level", cfg.log_level)
    return cfg
