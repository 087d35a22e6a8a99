"""Time-dependent discrimination and calibration metrics with inverse
probability of censoring weighting, plus bootstrap confidence intervals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_seed

G_FLOOR = 1e-4


class MetricUndefinedError(Exception):
    """The metric has no comparable pairs / positive censoring mass."""


@dataclass
class PredictionSet:
    """Per-patient predicted risks (1 - survival) at each horizon, with the
    observed follow-up time and event indicator."""

    horizons: np.ndarray
    risks: np.ndarray
    surv: np.ndarray
    times: np.ndarray
    events: np.ndarray

    def subset(self, idx) -> "PredictionSet":
        return PredictionSet(self.horizons, self.risks[idx], self.surv[idx],
                             self.times[idx], self.events[idx])


@dataclass
class CensoringCurve:
    """Kaplan-Meier estimate of P(censoring time > t), right-continuous."""

    times: np.ndarray
    values: np.ndarray

    def at(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate([[1.0], self.values])
        return padded[idx]

    def left(self, t):
        """Left limit G(t-)."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="left")
        padded = np.concatenate([[1.0], self.values])
        return padded[idx]


def km_censoring(times, events) -> CensoringCurve:
    """Kaplan-Meier applied to the censoring indicator (1 - event)."""
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events)
    if times.size == 0:
        raise ValueError("empty sample")
    censored = events == 0
    knot_times = np.unique(times[censored])
    g = 1.0
    values = np.empty_like(knot_times)
    for i, tau in enumerate(knot_times):
        at_risk = np.sum(times >= tau)
        d = np.sum(censored & (times == tau))
        g *= 1.0 - d / at_risk
        values[i] = g
    return CensoringCurve(times=knot_times, values=values)


def c_index_td(preds: PredictionSet, tau, censoring: CensoringCurve | None = None) -> float:
    """Time-dependent concordance at horizon tau.

    Comparable pairs (i, j): subject i had the event at T_i <= tau and
    T_i < T_j. A pair counts 1 if risk_i > risk_j, 1/2 on ties, and carries
    the IPCW weight 1 / G(T_i-)^2.
    """
    h = int(np.flatnonzero(np.isclose(preds.horizons, tau))[0])
    risks = preds.risks[:, h]
    times, events = preds.times, preds.events
    if censoring is None:
        censoring = km_censoring(times, events)
    is_case = (events > 0) & (times <= tau)
    comparable = is_case[:, None] & (times[None, :] > times[:, None])
    if not comparable.any():
        raise MetricUndefinedError(f"no comparable pairs at horizon {tau}")
    g_left = np.maximum(censoring.left(times), G_FLOOR)
    weights = (1.0 / g_left ** 2)[:, None] * comparable
    conc = np.where(risks[:, None] > risks[None, :], 1.0,
                    np.where(risks[:, None] == risks[None, :], 0.5, 0.0))
    return float(np.sum(weights * conc) / np.sum(weights))


def brier_td(preds: PredictionSet, tau, censoring: CensoringCurve | None = None) -> float:
    """IPCW Brier score at horizon tau; subjects censored before tau
    contribute zero."""
    h = int(np.flatnonzero(np.isclose(preds.horizons, tau))[0])
    surv = preds.surv[:, h]
    times, events = preds.times, preds.events
    if censoring is None:
        censoring = km_censoring(times, events)
    g_tau = float(censoring.at(tau))
    if g_tau <= 0:
        raise MetricUndefinedError(f"censoring survival is zero at horizon {tau}")
    g_left = np.maximum(censoring.left(times), G_FLOOR)
    had_event = (times <= tau) & (events > 0)
    still_alive = times > tau
    contrib = (surv ** 2 * had_event / g_left
               + (1.0 - surv) ** 2 * still_alive / max(g_tau, G_FLOOR))
    return float(np.mean(contrib))


def bootstrap_ci(metric_fn, preds: PredictionSet, n_boot: int = 100, seed: int = 0):
    """Resample patients with replacement; mean and 2.5/97.5 percentiles over
    the replicates. Errors if the metric is undefined on more than half."""
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = preds.times.size
    values = []
    undefined = 0
    for _ in range(n_boot):
        idx = rng.integers(0, n, size=n)
        try:
            values.append(metric_fn(preds.subset(idx)))
        except MetricUndefinedError:
            undefined += 1
    if undefined > n_boot // 2:
        raise MetricUndefinedError(
            f"metric undefined on {undefined}/{n_boot} bootstrap replicates")
    values = np.asarray(values)
    return float(values.mean()), float(np.percentile(values, 2.5)), float(np.percentile(values, 97.5))


@dataclass
class HorizonMetrics:
    horizon: float
    cindex_mean: float
    cindex_lo: float
    cindex_hi: float
    brier_mean: float
    brier_lo: float
    brier_hi: float


@dataclass
class MetricReport:
    """Per-horizon C-index and Brier score with bootstrap 95% intervals."""

    label: str
    n_bootstrap: int
    rows: list = field(default_factory=list)

    def to_dict(self):
        return {
            "label": self.label,
            "n_bootstrap": self.n_bootstrap,
            "horizons": [
                {"horizon_days": r.horizon,
                 "c_index": {"mean": r.cindex_mean, "lo": r.cindex_lo, "hi": r.cindex_hi},
                 "brier": {"mean": r.brier_mean, "lo": r.brier_lo, "hi": r.brier_hi}}
                for r in self.rows
            ],
        }


def evaluate_predictions(preds: PredictionSet, label: str, n_boot: int = 100,
                         seed: int = 0) -> MetricReport:
    """Point metrics use the full test set; intervals come from resampling."""
    report = MetricReport(label=label, n_bootstrap=n_boot)
    for i, tau in enumerate(preds.horizons):
        c_seed = derive_seed(seed, f"boot-cindex-{tau}")
        b_seed = derive_seed(seed, f"boot-brier-{tau}")
        c_mean, c_lo, c_hi = bootstrap_ci(lambda p: c_index_td(p, tau), preds,
                                          n_boot, c_seed)
        b_mean, b_lo, b_hi = bootstrap_ci(lambda p: brier_td(p, tau), preds,
                                          n_boot, b_seed)
        report.rows.append(HorizonMetrics(
            horizon=float(tau),
            cindex_mean=c_mean, cindex_lo=c_lo, cindex_hi=c_hi,
            brier_mean=b_mean, brier_lo=b_lo, brier_hi=b_hi))
    return report
