"""Input assembly for the experiment arms and the recurrent encoders.

All encoders run batched: inputs are lists of (B, D) step arrays and the
output is the list of (B, H) hidden states of the top layer. Single-record
use is the B = 1 case.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter
from .data import NormalizationStats, PatientRecord, lab_counts, resample_hourly


class InputMode(enum.Enum):
    VALUES_ONLY = "values_only"
    FEATURIZED = "featurized"
    GRUD_STYLE = "grud_style"
    RESAMPLED_HOURLY = "resampled_hourly"
    STATIC_LAST = "static_last"
    STATIC_LAST_PLUS_COUNTS = "static_last_plus_counts"


STATIC_MODES = (InputMode.STATIC_LAST, InputMode.STATIC_LAST_PLUS_COUNTS)


@dataclass
class GrudInputs:
    """Per-step arrays for the decay encoder: observed values, masks, per-lab
    time since last observation (hours) and the last observed value per lab."""

    values: np.ndarray
    masks: np.ndarray
    deltas: np.ndarray
    last_observed: np.ndarray


def input_width(mode: InputMode, n_labs: int) -> int:
    if mode in (InputMode.VALUES_ONLY, InputMode.RESAMPLED_HOURLY, InputMode.STATIC_LAST):
        return n_labs
    if mode == InputMode.FEATURIZED:
        return 2 * n_labs + 1
    if mode == InputMode.STATIC_LAST_PLUS_COUNTS:
        return 2 * n_labs
    if mode == InputMode.GRUD_STYLE:
        return 2 * n_labs
    raise ValueError(f"unknown input mode {mode}")


def assemble_inputs(record: PatientRecord, mode: InputMode,
                    stats: NormalizationStats | None = None,
                    feature_means: np.ndarray | None = None):
    """Build model inputs for one (already imputed) record.

    Sequence modes return an (L, D) array, static modes a (D,) vector and
    GRUD_STYLE a GrudInputs bundle. The elapsed-time feature of FEATURIZED is
    the raw per-step gap in minutes unless stats are given, in which case it
    is the z-scored gap in hours.
    """
    if record.n_steps == 0:
        raise ValueError(f"patient {record.patient_id!r} has zero observations")
    if mode != InputMode.GRUD_STYLE and np.isnan(record.values).any():
        raise ValueError("assemble_inputs expects an imputed record")
    values = record.values
    if mode == InputMode.VALUES_ONLY:
        return values.copy()
    if mode == InputMode.RESAMPLED_HOURLY:
        return resample_hourly(record).values
    if mode == InputMode.STATIC_LAST:
        return values[-1].copy()
    if mode == InputMode.STATIC_LAST_PLUS_COUNTS:
        return np.concatenate([values[-1], lab_counts(record)])
    if mode == InputMode.FEATURIZED:
        gaps = record.gaps_minutes
        if stats is not None:
            gaps = (gaps / 60.0 - stats.gap_mean_hours) / stats.gap_std_hours
        return np.concatenate([values, record.masks, gaps[:, None]], axis=1)
    if mode == InputMode.GRUD_STYLE:
        return _grud_inputs(record, feature_means)
    raise ValueError(f"unknown input mode {mode}")


def _grud_inputs(record: PatientRecord, feature_means) -> GrudInputs:
    """Per-lab delta recursion: delta resets on observation and otherwise
    accumulates elapsed time; the first step starts at zero."""
    n_steps, n_labs = record.masks.shape
    means = np.zeros(n_labs) if feature_means is None else np.asarray(feature_means)
    gaps_h = record.gaps_minutes / 60.0
    deltas = np.zeros((n_steps, n_labs))
    last = np.tile(means, (n_steps, 1))
    last_seen = means.copy()
    for j in range(n_steps):
        if j > 0:
            deltas[j] = gaps_h[j] + deltas[j - 1] * (record.masks[j - 1] == 0)
        last[j] = last_seen
        observed = record.masks[j] > 0
        last_seen = np.where(observed, record.values[j], last_seen)
    values = np.nan_to_num(record.values) * record.masks
    return GrudInputs(values=values, masks=record.masks.copy(), deltas=deltas,
                      last_observed=last)


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LSTMLayer:
    w_in: Parameter
    w_rec: Parameter
    bias: Parameter


@dataclass
class LSTMParams:
    layers: list
    hidden: int

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend([layer.w_in, layer.w_rec, layer.bias])
        return out


def init_lstm(rng, input_dim: int, hidden: int, n_layers: int,
              name: str = "lstm") -> LSTMParams:
    """Uniform +-1/sqrt(fan-in) weights; forget-gate bias starts at 1."""
    layers = []
    d = input_dim
    for i in range(n_layers):
        w_in = rng.uniform(-1, 1, size=(d, 4 * hidden)) / np.sqrt(d)
        w_rec = rng.uniform(-1, 1, size=(hidden, 4 * hidden)) / np.sqrt(hidden)
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0
        layers.append(LSTMLayer(
            w_in=Parameter(w_in, name=f"{name}{i}.w_in"),
            w_rec=Parameter(w_rec, name=f"{name}{i}.w_rec"),
            bias=Parameter(bias, name=f"{name}{i}.bias")))
        d = hidden
    return LSTMParams(layers=layers, hidden=hidden)


def lstm_forward(params: LSTMParams, inputs):
    """Run the stacked LSTM over a list of (B, D) steps; hidden and cell
    states start at zero. Returns the top layer's hidden state per step."""
    if not inputs:
        raise ValueError("lstm_forward requires at least one step")
    steps = [ad.lift(x) for x in inputs]
    widths = {s.value.shape[-1] for s in steps}
    if len(widths) != 1:
        raise ValueError(f"inconsistent input widths {sorted(widths)}")
    hdim = params.hidden
    seq = steps
    for layer in params.layers:
        if seq[0].value.shape[-1] != layer.w_in.value.shape[0]:
            raise ValueError(
                f"input width {seq[0].value.shape[-1]} does not match layer "
                f"expecting {layer.w_in.value.shape[0]}")
        batch = seq[0].value.shape[0]
        h = Node(np.zeros((batch, hdim)))
        c = Node(np.zeros((batch, hdim)))
        out = []
        for x in seq:
            z = ad.matmul(x, layer.w_in) + ad.matmul(h, layer.w_rec) + layer.bias
            i_gate = ad.sigmoid(z[:, :hdim])
            f_gate = ad.sigmoid(z[:, hdim:2 * hdim])
            g_gate = ad.tanh(z[:, 2 * hdim:3 * hdim])
            o_gate = ad.sigmoid(z[:, 3 * hdim:])
            c = f_gate * c + i_gate * g_gate
            h = o_gate * ad.tanh(c)
            out.append(h)
        seq = out
    return seq


# ---------------------------------------------------------------------------
# GRU-D


@dataclass
class GRUDParams:
    w_in: Parameter
    w_rec: Parameter
    bias: Parameter
    decay_in_w: Parameter
    decay_in_b: Parameter
    decay_h_w: Parameter
    decay_h_b: Parameter
    means: np.ndarray
    hidden: int

    def parameters(self):
        return [self.w_in, self.w_rec, self.bias, self.decay_in_w,
                self.decay_in_b, self.decay_h_w, self.decay_h_b]


def init_grud(rng, n_labs: int, hidden: int, means: np.ndarray,
              name: str = "grud") -> GRUDParams:
    d = 2 * n_labs
    return GRUDParams(
        w_in=Parameter(rng.uniform(-1, 1, size=(d, 3 * hidden)) / np.sqrt(d),
                       name=f"{name}.w_in"),
        w_rec=Parameter(rng.uniform(-1, 1, size=(hidden, 3 * hidden)) / np.sqrt(hidden),
                        name=f"{name}.w_rec"),
        bias=Parameter(np.zeros(3 * hidden), name=f"{name}.bias"),
        decay_in_w=Parameter(rng.uniform(-0.1, 0.1, size=n_labs), name=f"{name}.dec_in_w"),
        decay_in_b=Parameter(np.zeros(n_labs), name=f"{name}.dec_in_b"),
        decay_h_w=Parameter(rng.uniform(-0.1, 0.1, size=(n_labs, hidden)),
                            name=f"{name}.dec_h_w"),
        decay_h_b=Parameter(np.zeros(hidden), name=f"{name}.dec_h_b"),
        means=np.asarray(means, dtype=np.float64),
        hidden=hidden)


def grud_imputed_input(params: GRUDParams, x: Node, m: Node, delta: Node,
                       x_last: Node) -> Node:
    """Decay blend for unobserved inputs: observed entries pass through,
    missing entries fade from the last observation toward the training mean
    as the per-lab delta grows."""
    gamma_x = ad.exp(-ad.relu(delta * params.decay_in_w + params.decay_in_b))
    return m * x + (1.0 - m) * (gamma_x * x_last + (1.0 - gamma_x) * params.means)


def grud_forward(params: GRUDParams, values, masks, deltas, last_observed):
    """GRU with learned exponential decay on inputs and hidden state.

    Inputs are aligned lists of (B, K) arrays. Each missing input is imputed
    as a decay-weighted blend of the last observed value and the training
    mean; the hidden state is shrunk by its own decay before the GRU update.
    Decay rates exp(-relu(w*delta + b)) always lie in (0, 1].
    """
    n_steps = len(values)
    if n_steps == 0:
        raise ValueError("grud_forward requires at least one step")
    for d in deltas:
        if np.any(np.asarray(d) < 0):
            raise ValueError("negative time delta")
    hdim = params.hidden
    batch = np.asarray(values[0]).shape[0]
    h = Node(np.zeros((batch, hdim)))
    out = []
    for j in range(n_steps):
        x = Node(values[j])
        m = Node(np.asarray(masks[j], dtype=np.float64))
        delta = Node(deltas[j])
        x_last = Node(last_observed[j])
        x_hat = grud_imputed_input(params, x, m, delta, x_last)
        gamma_h = ad.exp(-ad.relu(ad.matmul(delta, params.decay_h_w) + params.decay_h_b))
        h = gamma_h * h
        u = ad.concat([x_hat, m], axis=1)
        xz = ad.matmul(u, params.w_in) + params.bias
        hz = ad.matmul(h, params.w_rec)
        r = ad.sigmoid(xz[:, :hdim] + hz[:, :hdim])
        z = ad.sigmoid(xz[:, hdim:2 * hdim] + hz[:, hdim:2 * hdim])
        n = ad.tanh(xz[:, 2 * hdim:] + r * hz[:, 2 * hdim:])
        h = (1.0 - z) * n + z * h
        out.append(h)
    return out
