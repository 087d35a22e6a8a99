"""Experiment configuration: one YAML config language for regimes and
experiments, the default hyperparameter grid, and run manifests."""
from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field

import yaml

from .model import ConfigError, ModelConfig, variant_spec
from .synthgen import RegimeConfig
from .training import TrainConfig

# default search grid; a search driver is a thin loop over grid_points()
DEFAULT_GRID = {
    "learning_rate": [1e-3, 1e-4],
    "batch_size": [100, 250],
    "alpha": [0.1, 0.5],
    "theta": [2.0],
    "rnn_layers": [1, 2, 3],
    "hidden": [10, 30],
    "head_layers": [0, 1, 2, 3],
    "head_nodes": [50],
}

_TRAIN_KEYS = ("alpha", "theta", "learning_rate", "batch_size", "max_epochs",
               "multitask_epochs", "patience", "validation_fraction",
               "window_hours")
_MODEL_KEYS = ("hidden", "rnn_layers", "head_layers", "head_nodes")


@dataclass
class ExperimentConfig:
    variant: str = "DeepJointFeature"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    horizons: tuple = (1.0, 7.0, 14.0)
    n_bootstrap: int = 100
    train_fraction: float = 0.9
    out_dir: str = "runs"
    # data source: either file paths or a generator regime
    longitudinal_path: str | None = None
    outcome_path: str | None = None
    regime: RegimeConfig | None = None
    n_patients: int = 0
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))

    def resolved(self) -> dict:
        out = asdict(self)
        out["train"]["variant"] = self.variant
        return out

    def validate(self):
        variant_spec(self.variant)
        self.train.variant = self.variant
        self.train.seed = self.seed
        self.train.validate()
        self.model.validate()
        has_files = self.longitudinal_path and self.outcome_path
        if not has_files and self.regime is None:
            raise ConfigError("config needs either data file paths or a regime")
        if self.regime is not None and not has_files and self.n_patients < 1:
            raise ConfigError("generator source needs n_patients >= 1")

    def grid_points(self):
        """Iterate (TrainConfig, ModelConfig) pairs over the configured grid."""
        keys = sorted(self.grid)
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            point = dict(zip(keys, combo))
            train = TrainConfig(**{**_dataclass_dict(self.train),
                                   **{k: point[k] for k in point if k in _TRAIN_KEYS}})
            model = ModelConfig(**{**_dataclass_dict(self.model),
                                   **{k: point[k] for k in point if k in _MODEL_KEYS}})
            yield train, model


def _dataclass_dict(obj):
    return {k: v for k, v in vars(obj).items()}


def _build_regime(raw: dict) -> RegimeConfig:
    try:
        regime = RegimeConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad regime config: {exc}") from None
    regime.validate()
    return regime


def load_regime_config(path) -> RegimeConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"regime config {path} must be a mapping")
    raw.pop("kind", None)
    return _build_regime(raw)


def load_experiment_config(path) -> ExperimentConfig:
    """Parse the experiment YAML; unknown keys are rejected so typos fail
    loudly instead of silently using defaults."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"experiment config {path} must be a mapping")
    cfg = ExperimentConfig()
    data = raw.pop("data", {}) or {}
    if not isinstance(data, dict):
        raise ConfigError("data section must be a mapping")
    cfg.longitudinal_path = data.pop("longitudinal", None)
    cfg.outcome_path = data.pop("outcome", None)
    cfg.n_patients = int(data.pop("n_patients", 0) or 0)
    regime_raw = data.pop("regime", None)
    if regime_raw is not None:
        cfg.regime = _build_regime(dict(regime_raw))
    if data:
        raise ConfigError(f"unknown data keys: {sorted(data)}")

    train_raw = raw.pop("train", {}) or {}
    model_raw = raw.pop("model", {}) or {}
    for key, value in train_raw.items():
        if not hasattr(cfg.train, key):
            raise ConfigError(f"unknown train key {key!r}")
        setattr(cfg.train, key, type(getattr(cfg.train, key))(value))
    for key, value in model_raw.items():
        if not hasattr(cfg.model, key):
            raise ConfigError(f"unknown model key {key!r}")
        setattr(cfg.model, key, int(value))
    for key in ("variant", "seed", "n_bootstrap", "out_dir", "train_fraction"):
        if key in raw:
            value = raw.pop(key)
            cast = type(getattr(cfg, key))
            setattr(cfg, key, cast(value))
    if "horizons" in raw:
        cfg.horizons = tuple(float(h) for h in raw.pop("horizons"))
    if "grid" in raw:
        grid = raw.pop("grid") or {}
        unknown = sorted(set(grid) - set(DEFAULT_GRID))
        if unknown:
            raise ConfigError(f"unknown grid keys: {unknown}")
        cfg.grid.update({k: list(v) for k, v in grid.items()})
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    cfg.model.n_labs = cfg.regime.n_labs if cfg.regime is not None else cfg.model.n_labs
    cfg.validate()
    return cfg


@dataclass
class RunManifest:
    """Written before any metrics so a run can be reproduced exactly."""

    config: dict
    dataset_fingerprint: str
    artifact_version: str
    wall_clock: str
    stage_epochs: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: dict, fingerprint: str, stage_epochs=None):
        from . import __version__

        return cls(config=config, dataset_fingerprint=fingerprint,
                   artifact_version=__version__,
                   wall_clock=time.strftime("%Y-%m-%dT%H:%M:%S"),
                   stage_epochs=dict(stage_epochs or {}))

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
