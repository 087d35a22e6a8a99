"""Task heads over a shared embedding: Gaussian next-value prediction,
Bernoulli missingness prediction, a monotone cumulative-hazard network for
inter-observation gaps, and a Cox proportional-hazards risk score with a
piecewise-constant Breslow baseline.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter

SIGMA_FLOOR = 1e-4
INTENSITY_FLOOR = 1e-10
LOGIT_CLAMP = 30.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Mlp:
    """Plain multi-layer perceptron, tanh hidden activations, linear output."""

    def __init__(self, rng, in_dim, out_dim, hidden_layers, hidden_nodes, name):
        self.name = name
        dims = [in_dim] + [hidden_nodes] * hidden_layers + [out_dim]
        self.weights = []
        self.biases = []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.weights.append(Parameter(_uniform(rng, d_in, (d_in, d_out)),
                                          name=f"{name}.w{i}"))
            self.biases.append(Parameter(np.zeros(d_out), name=f"{name}.b{i}"))

    def parameters(self):
        return list(self.weights) + list(self.biases)

    def forward(self, x: Node) -> Node:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.matmul(h, w) + b
            if i < last:
                h = ad.tanh(h)
        return h


class GaussianHead:
    """Predicts per-lab mean and standard deviation from (embedding, gap)."""

    def __init__(self, rng, embed_dim, n_labs, hidden_layers, hidden_nodes):
        self.n_labs = n_labs
        self.mlp = Mlp(rng, embed_dim + 1, 2 * n_labs, hidden_layers, hidden_nodes,
                       name="head_long")

    def parameters(self):
        return self.mlp.parameters()

    def forward(self, h_and_t: Node):
        out = self.mlp.forward(h_and_t)
        mu = out[:, : self.n_labs]
        sigma = ad.softplus(out[:, self.n_labs:]) + SIGMA_FLOOR
        return mu, sigma


class BernoulliHead:
    """Predicts per-lab observation probabilities from (embedding, gap)."""

    def __init__(self, rng, embed_dim, n_labs, hidden_layers, hidden_nodes):
        self.mlp = Mlp(rng, embed_dim + 1, n_labs, hidden_layers, hidden_nodes,
                       name="head_miss")

    def parameters(self):
        return self.mlp.parameters()

    def forward(self, h_and_t: Node) -> Node:
        logits = ad.clip(self.mlp.forward(h_and_t), -LOGIT_CLAMP, LOGIT_CLAMP)
        return ad.sigmoid(logits)


class MonotoneHazardHead:
    """Cumulative-hazard network, nondecreasing in the gap by construction.

    Every weight on a path from the gap input to the output is the elementwise
    square of a free parameter, and the activations (tanh) are increasing, so
    the output is nondecreasing in the gap. The embedding enters the first
    layer with unconstrained weights. The instantaneous intensity is computed
    structurally alongside the forward pass by propagating d/dt through each
    layer, which keeps it differentiable with respect to the parameters.
    """

    def __init__(self, rng, embed_dim, hidden_layers, hidden_nodes):
        self.hidden_layers = hidden_layers
        n = hidden_nodes if hidden_layers >= 1 else 1
        # scale the free t-weights down so their squares do not saturate
        # tanh over gaps measured in hours (0..24)
        self.wt_free = Parameter(rng.uniform(-0.5, 0.5, size=(1, n)), name="head_tpp.wt")
        self.wh = Parameter(_uniform(rng, embed_dim, (embed_dim, n)), name="head_tpp.wh")
        self.b1 = Parameter(np.zeros(n), name="head_tpp.b1")
        self.hidden_free = []
        self.hidden_biases = []
        for i in range(max(hidden_layers - 1, 0)):
            self.hidden_free.append(Parameter(rng.uniform(-0.5, 0.5, size=(n, n)),
                                              name=f"head_tpp.u{i}"))
            self.hidden_biases.append(Parameter(np.zeros(n), name=f"head_tpp.bu{i}"))
        self.wo_free = Parameter(rng.uniform(-0.5, 0.5, size=(n, 1)), name="head_tpp.wo")

    def parameters(self):
        return ([self.wt_free, self.wh, self.b1, self.wo_free]
                + self.hidden_free + self.hidden_biases)

    def _raw_and_slope(self, h: Node, t: Node):
        """Unanchored cumulative output and its derivative in t, both (B, 1)."""
        wt2 = ad.square(self.wt_free)
        if self.hidden_layers == 0:
            raw = ad.matmul(t, wt2) + ad.matmul(h, self.wh)
            ones = Node(np.ones((t.value.shape[0], 1)))
            return raw, ad.matmul(ones, wt2)
        u = ad.tanh(ad.matmul(t, wt2) + ad.matmul(h, self.wh) + self.b1)
        slope = (1.0 - ad.square(u)) * wt2
        for w_free, b in zip(self.hidden_free, self.hidden_biases):
            w2 = ad.square(w_free)
            u_next = ad.tanh(ad.matmul(u, w2) + b)
            slope = (1.0 - ad.square(u_next)) * ad.matmul(slope, w2)
            u = u_next
        wo2 = ad.square(self.wo_free)
        return ad.matmul(u, wo2), ad.matmul(slope, wo2)

    def cumulative_hazard(self, h, t) -> Node:
        """Anchored cumulative hazard, exactly zero at t = 0; (B,) output."""
        h = ad.lift(h)
        t = ad.lift(t)
        if np.any(t.value < 0):
            raise ValueError("cumulative hazard requires t >= 0")
        raw_t, _ = self._raw_and_slope(h, t)
        raw_0, _ = self._raw_and_slope(h, Node(np.zeros_like(t.value)))
        return ad.reshape(raw_t - raw_0, (-1,))

    def intensity(self, h, t) -> Node:
        h = ad.lift(h)
        t = ad.lift(t)
        _, lam = self._raw_and_slope(h, t)
        return ad.reshape(lam, (-1,))

    def nll_rows(self, h, gaps) -> Node:
        """Per-row gap NLL: cumulative hazard at the gap minus log intensity."""
        h = ad.lift(h)
        gaps = ad.lift(gaps)
        if np.any(gaps.value <= 0):
            raise ValueError("gap NLL requires strictly positive gaps")
        raw_t, lam = self._raw_and_slope(h, gaps)
        raw_0, _ = self._raw_and_slope(h, Node(np.zeros_like(gaps.value)))
        cum = ad.reshape(raw_t - raw_0, (-1,))
        lam = ad.clip(ad.reshape(lam, (-1,)), INTENSITY_FLOOR, None)
        return cum - ad.log(lam)


class SurvivalHead:
    """DeepSurv-style risk score: an MLP mapping features to a scalar."""

    def __init__(self, rng, in_dim, hidden_layers, hidden_nodes):
        self.mlp = Mlp(rng, in_dim, 1, hidden_layers, hidden_nodes, name="head_surv")

    def parameters(self):
        return self.mlp.parameters()

    def forward(self, x: Node) -> Node:
        return ad.reshape(self.mlp.forward(x), (-1,))


# ---------------------------------------------------------------------------
# losses


def longitudinal_nll(mu, sigma, labs, mask):
    """Masked Gaussian NLL summed over labs.

    Unobserved coordinates (mask 0) contribute exactly zero; their lab values
    are zeroed before entering the graph so arbitrary fill-ins cannot leak.
    Returns a scalar Node for 1-D inputs, a per-row (B,) Node for 2-D.
    """
    labs = np.asarray(labs, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    labs = np.where(mask > 0, labs, 0.0)
    if not np.all(np.isfinite(labs)):
        raise ad.NonFiniteError("non-finite observed lab value in Gaussian NLL")
    mu, sigma = ad.lift(mu), ad.lift(sigma)
    if np.any(sigma.value <= 0):
        raise ValueError("sigma must be strictly positive")
    resid = Node(labs) - mu
    per = ad.square(resid) / (2.0 * ad.square(sigma)) + ad.log(sigma) + _HALF_LOG_2PI
    masked = per * Node(mask)
    if masked.value.ndim == 1:
        return ad.total_sum(masked)
    return ad.sum_axis(masked, axis=-1)


def missingness_nll(probs, mask):
    """Bernoulli NLL (binary cross entropy) of the observation mask."""
    mask = np.asarray(mask, dtype=np.float64)
    probs = ad.lift(probs)
    if np.any(probs.value <= 0) or np.any(probs.value >= 1):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    m = Node(mask)
    per = -(m * ad.log(probs) + (1.0 - m) * ad.log(1.0 - probs))
    if per.value.ndim == 1:
        return ad.total_sum(per)
    return ad.sum_axis(per, axis=-1)


def cox_partial_nll(scores, times, events):
    """Negative Cox partial log-likelihood with Breslow tie handling.

    The risk set for an event at T_i is every subject with T_k >= T_i,
    including subject i itself. An all-censored sample has a constant
    likelihood; it returns 0 and emits a warning.
    """
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    if times.size == 0:
        raise ValueError("empty sample")
    if np.any(times <= 0):
        raise ValueError("event/censoring times must be positive")
    scores = ad.lift(scores)
    ev = events > 0
    if not ev.any():
        warnings.warn("all-censored sample: Cox partial likelihood is constant")
        return Node(0.0)
    n = times.size
    risk = (times[None, :] >= times[ev, None]).astype(np.float64)
    shift = float(np.max(scores.value))
    exp_s = ad.exp(scores - shift)
    risk_sums = ad.matmul(Node(risk), ad.reshape(exp_s, (n, 1)))
    log_sums = ad.log(risk_sums) + shift
    return ad.total_sum(log_sums) - ad.total_sum(scores * Node(ev.astype(np.float64)))


# ---------------------------------------------------------------------------
# baseline hazard and survival curves


@dataclass
class BaselineHazard:
    """Piecewise-constant cumulative baseline hazard as sorted knots."""

    times: np.ndarray
    values: np.ndarray

    def cumulative(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate([[0.0], self.values])
        return padded[idx]


@dataclass
class SurvivalEstimate:
    """Per-subject risk score plus the population baseline hazard."""

    risk_score: float
    baseline: BaselineHazard

    def survival(self, horizons):
        lam0 = self.baseline.cumulative(horizons)
        return np.exp(-lam0 * np.exp(self.risk_score))


def breslow_baseline(scores, times, events) -> BaselineHazard:
    """Breslow estimator: at each event time the baseline cumulative hazard
    jumps by (#events) / (sum of exp scores over the risk set)."""
    scores = scores.value if isinstance(scores, Node) else np.asarray(scores)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events) > 0
    exp_s = np.exp(scores - np.max(scores)) if scores.size else scores
    rescale = np.exp(np.max(scores)) if scores.size else 1.0
    knot_times = np.unique(times[events])
    increments = np.empty_like(knot_times)
    for i, tau in enumerate(knot_times):
        at_risk = times >= tau
        increments[i] = np.sum(events & (times == tau)) / (np.sum(exp_s[at_risk]) * rescale)
    return BaselineHazard(times=knot_times, values=np.cumsum(increments))


def survival_curve(estimate: SurvivalEstimate, horizons):
    """S(tau | x) = exp(-Lambda0(tau) * exp(risk score)) at each horizon."""
    horizons = np.asarray(horizons, dtype=np.float64)
    if np.any(horizons < 0):
        raise ValueError("horizons must be nonnegative")
    return estimate.survival(horizons)
