"""Experiment arms and the assembled model: encoder plus task heads.

The nine arms differ in input construction, encoder and whether the
observation-process heads exist:

  Last, Count          static features straight into the survival head
  Ignore, Resample     LSTM on imputed values (irregular / hourly grid)
  GRU-D                decay encoder on values + masks + deltas
  Feature              LSTM on values + masks + elapsed time
  DeepJoint            LSTM on values, all four heads
  DeepJointFeature     LSTM on featurized inputs, all four heads
  DeepJointFineTune    DeepJointFeature with a full unfreeze in stage 2
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import (GRUDParams, InputMode, LSTMParams, init_grud, init_lstm,
                      input_width)
from .heads import BernoulliHead, GaussianHead, MonotoneHazardHead, SurvivalHead


class ConfigError(Exception):
    """Invalid experiment or model configuration."""


@dataclass(frozen=True)
class VariantSpec:
    name: str
    mode: InputMode
    encoder: str  # "lstm" | "grud" | "none"
    presence: bool
    finetune_all: bool = False


_VARIANTS = {
    "Last": VariantSpec("Last", InputMode.STATIC_LAST, "none", False),
    "Count": VariantSpec("Count", InputMode.STATIC_LAST_PLUS_COUNTS, "none", False),
    "Ignore": VariantSpec("Ignore", InputMode.VALUES_ONLY, "lstm", False),
    "Resample": VariantSpec("Resample", InputMode.RESAMPLED_HOURLY, "lstm", False),
    "GRUD": VariantSpec("GRUD", InputMode.GRUD_STYLE, "grud", False),
    "Feature": VariantSpec("Feature", InputMode.FEATURIZED, "lstm", False),
    "DeepJoint": VariantSpec("DeepJoint", InputMode.VALUES_ONLY, "lstm", True),
    "DeepJointFeature": VariantSpec("DeepJointFeature", InputMode.FEATURIZED, "lstm", True),
    "DeepJointFineTune": VariantSpec("DeepJointFineTune", InputMode.FEATURIZED, "lstm",
                                     True, finetune_all=True),
}

VARIANT_NAMES = list(_VARIANTS)

_ALIASES = {name.lower(): name for name in _VARIANTS}
_ALIASES["gru-d"] = "GRUD"


def variant_spec(name: str) -> VariantSpec:
    key = _ALIASES.get(str(name).lower())
    if key is None:
        raise ConfigError(
            f"unknown variant {name!r}; expected one of {', '.join(VARIANT_NAMES)}")
    return _VARIANTS[key]


@dataclass
class ModelConfig:
    n_labs: int = 4
    hidden: int = 10
    rnn_layers: int = 1
    head_layers: int = 1
    head_nodes: int = 50

    def validate(self):
        if self.n_labs < 1 or self.hidden < 1 or self.rnn_layers < 1:
            raise ConfigError("n_labs, hidden and rnn_layers must be >= 1")
        if self.head_layers < 0 or self.head_nodes < 1:
            raise ConfigError("head_layers must be >= 0 and head_nodes >= 1")


class Model:
    """Encoder and heads for one variant; owns all trainable parameters."""

    def __init__(self, variant: str, config: ModelConfig, rng,
                 feature_means: np.ndarray | None = None):
        config.validate()
        self.spec = variant_spec(variant)
        self.config = config
        self.feature_means = (np.zeros(config.n_labs) if feature_means is None
                              else np.asarray(feature_means, dtype=np.float64))
        k = config.n_labs
        self.lstm: LSTMParams | None = None
        self.grud: GRUDParams | None = None
        if self.spec.encoder == "lstm":
            self.lstm = init_lstm(rng, input_width(self.spec.mode, k),
                                  config.hidden, config.rnn_layers)
            surv_in = config.hidden
        elif self.spec.encoder == "grud":
            self.grud = init_grud(rng, k, config.hidden, self.feature_means)
            surv_in = config.hidden
        else:
            surv_in = input_width(self.spec.mode, k)
        self.head_long = None
        self.head_miss = None
        self.head_tpp = None
        if self.spec.presence:
            self.head_long = GaussianHead(rng, config.hidden, k,
                                          config.head_layers, config.head_nodes)
            self.head_miss = BernoulliHead(rng, config.hidden, k,
                                           config.head_layers, config.head_nodes)
            self.head_tpp = MonotoneHazardHead(rng, config.hidden,
                                               config.head_layers, config.head_nodes)
        self.head_surv = SurvivalHead(rng, surv_in, config.head_layers,
                                      config.head_nodes)

    # -- parameter groups -------------------------------------------------

    def encoder_parameters(self):
        if self.lstm is not None:
            return self.lstm.parameters()
        if self.grud is not None:
            return self.grud.parameters()
        return []

    def presence_parameters(self):
        out = []
        for head in (self.head_long, self.head_miss, self.head_tpp):
            if head is not None:
                out.extend(head.parameters())
        return out

    def survival_parameters(self):
        return self.head_surv.parameters()

    def parameters(self):
        return (self.encoder_parameters() + self.presence_parameters()
                + self.survival_parameters())

    def param_dict(self):
        params = {}
        for p in self.parameters():
            if p.name in params:
                raise ConfigError(f"duplicate parameter name {p.name!r}")
            params[p.name] = p
        return params

    def snapshot(self):
        return {name: p.value.copy() for name, p in self.param_dict().items()}

    def restore(self, snapshot) -> None:
        for name, p in self.param_dict().items():
            p.value = snapshot[name].copy()
