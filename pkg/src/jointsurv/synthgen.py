"""Seeded synthetic cohort generator with an explicitly informative
observation process.

Each patient carries a latent severity path (stationary AR(1) on a fine
grid over the 24h window). Observation times come from thinning an
inhomogeneous point process whose rate rises with severity; per-lab
missingness also depends on severity; measured values load on severity plus
noise. The survival hazard depends on the end-of-window severity, and the
cohort is conditioned on surviving the window by rejection, mirroring the
selection applied to real admissions data. Regime shifts may change only
the observation-process knobs, never the outcome model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, PatientRecord
from .model import ConfigError

WINDOW_HOURS = 24.0
_GRID_STEP_HOURS = 0.25

# fields shift_regime may override: the observation process plus sampling
# labels; outcome-model fields are rejected so P(outcome | latent state) is
# preserved across regimes
SHIFTABLE_FIELDS = ("base_gap_rate", "miss_prob_base", "miss_prob_slope",
                    "severity_coupling", "seed", "admission_profile")


@dataclass
class RegimeConfig:
    """Observation-process and outcome parameters for one synthetic regime."""

    n_labs: int = 4
    base_gap_rate: float = 0.35        # observations per hour at severity 0
    severity_coupling: float = 1.0     # kappa: rate multiplier exp(kappa * severity)
    lab_loadings: tuple = ()           # per-lab loading on severity; 1.0 if empty
    miss_prob_base: float = 0.3
    miss_prob_slope: float = 0.0       # added miss probability per unit severity
    noise_std: float = 0.5
    ar_coeff: float = 0.95             # per fine-grid step
    ar_innovation_std: float = 0.3
    hazard_base: float = 0.02          # events per day at severity 0
    hazard_coeff: float = 0.9
    censor_horizon_days: float = 30.0
    admission_profile: str = "uniform"  # uniform | weekday | weekend
    seed: int = 0

    def loadings(self) -> np.ndarray:
        if self.lab_loadings:
            arr = np.asarray(self.lab_loadings, dtype=np.float64)
            if arr.shape != (self.n_labs,):
                raise ConfigError("lab_loadings length must equal n_labs")
            return arr
        return np.ones(self.n_labs)

    def validate(self):
        if self.n_labs < 1:
            raise ConfigError("n_labs must be >= 1")
        if self.base_gap_rate <= 0:
            raise ConfigError("base_gap_rate must be positive")
        if self.severity_coupling < 0 or self.noise_std < 0:
            raise ConfigError("severity_coupling and noise_std must be >= 0")
        if not 0.0 <= self.ar_coeff < 1.0:
            raise ConfigError("ar_coeff must lie in [0, 1)")
        if self.ar_innovation_std < 0:
            raise ConfigError("ar_innovation_std must be >= 0")
        if not 0.0 <= self.miss_prob_base < 1.0:
            raise ConfigError("miss_prob_base must lie in [0, 1)")
        if self.hazard_base <= 0:
            raise ConfigError("hazard_base must be positive")
        if self.censor_horizon_days <= 1.0:
            raise ConfigError("censor_horizon_days must exceed the 1-day window")
        if self.admission_profile not in ("uniform", "weekday", "weekend"):
            raise ConfigError(f"unknown admission_profile {self.admission_profile!r}")
        self.loadings()


def shift_regime(base: RegimeConfig, overrides: dict) -> RegimeConfig:
    """New regime differing only in observation-process fields; touching the
    outcome model would contaminate the shift semantics and is an error."""
    bad = sorted(set(overrides) - set(SHIFTABLE_FIELDS))
    if bad:
        raise ConfigError(
            f"regime shift may not touch outcome-model fields: {bad}; "
            f"allowed: {list(SHIFTABLE_FIELDS)}")
    shifted = replace(base, **overrides)
    shifted.validate()
    return shifted


def _severity_path(rng, regime) -> np.ndarray:
    n = int(WINDOW_HOURS / _GRID_STEP_HOURS) + 1
    rho = regime.ar_coeff
    innov = regime.ar_innovation_std
    path = np.empty(n)
    stationary_std = innov / math.sqrt(1.0 - rho * rho) if innov > 0 else 0.0
    path[0] = rng.normal(0.0, stationary_std) if stationary_std > 0 else 0.0
    noise = rng.normal(0.0, innov, size=n - 1) if innov > 0 else np.zeros(n - 1)
    for i in range(1, n):
        path[i] = rho * path[i - 1] + noise[i - 1]
    return path


def _severity_at(path, hours):
    grid = np.arange(path.size) * _GRID_STEP_HOURS
    return np.interp(hours, grid, path)


def _observation_times(rng, regime, path) -> np.ndarray:
    """Thinning of an inhomogeneous process with rate base * exp(kappa * s(t));
    redrawn until at least one observation lands in the window."""
    kappa = regime.severity_coupling
    rate_max = regime.base_gap_rate * math.exp(kappa * float(path.max()))
    for _ in range(10_000):
        n_cand = rng.poisson(rate_max * WINDOW_HOURS)
        if n_cand == 0:
            continue
        cand = rng.uniform(0.0, WINDOW_HOURS, size=n_cand)
        accept_p = regime.base_gap_rate * np.exp(kappa * _severity_at(path, cand)) / rate_max
        keep = cand[rng.uniform(size=n_cand) < accept_p]
        keep = np.unique(keep[keep > 0])
        if keep.size:
            return np.sort(keep)
    raise ConfigError("observation process produced no events after 10000 redraws; "
                      "base_gap_rate is too small")


def _admission_slot(rng, profile):
    """Hour-of-week draw; the weekday band is [Mon 08:00, Sat 08:00)."""
    if profile == "weekday":
        how = int(rng.integers(8, 128))
    elif profile == "weekend":
        how = int(rng.integers(128, 168 + 8)) % 168
    else:
        how = int(rng.integers(0, 168))
    return how // 24, how % 24


def _generate_patient(rng, regime, loadings):
    """One accepted patient; rejection on dying inside the observation
    window reshapes the severity distribution exactly like the cohort
    selection it mirrors."""
    for _ in range(10_000):
        path = _severity_path(rng, regime)
        obs_hours = _observation_times(rng, regime, path)
        sev_at_obs = _severity_at(path, obs_hours)
        n_obs = obs_hours.size
        k = regime.n_labs
        values = (loadings[None, :] * sev_at_obs[:, None]
                  + rng.normal(0.0, regime.noise_std, size=(n_obs, k)))
        miss_p = np.clip(regime.miss_prob_base
                         + regime.miss_prob_slope * sev_at_obs[:, None], 0.0, 0.99)
        masks = (rng.uniform(size=(n_obs, k)) >= miss_p).astype(np.float64)
        for lab in range(k):
            if masks[:, lab].sum() == 0:
                masks[int(rng.integers(0, n_obs)), lab] = 1.0
        step_has_obs = masks.sum(axis=1) > 0
        obs_hours = obs_hours[step_has_obs]
        values = values[step_has_obs]
        masks = masks[step_has_obs]

        sev_end = _severity_at(path, WINDOW_HOURS)
        rate_per_day = regime.hazard_base * math.exp(regime.hazard_coeff * sev_end)
        event_days = rng.exponential(1.0 / rate_per_day)
        if event_days <= 1.0:
            continue  # died inside the observation window: rejected from cohort
        followup = min(event_days, regime.censor_horizon_days)
        event = int(event_days < regime.censor_horizon_days)
        weekday, hour = _admission_slot(rng, regime.admission_profile)
        values = np.where(masks > 0, values, np.nan)
        return PatientRecord(
            patient_id="", times_minutes=obs_hours * 60.0, values=values,
            masks=masks, followup_days=followup, event=event,
            admission_weekday=weekday, admission_hour=hour)
    raise ConfigError("patient rejected 10000 times; hazard_base is too large "
                      "for the survival conditioning")


def generate(n_patients: int, regime: RegimeConfig) -> Dataset:
    """Seeded cohort of n_patients; per-patient generators are spawned from
    the regime seed so generation is reproducible and order-independent."""
    if n_patients < 1:
        raise ConfigError("n_patients must be >= 1")
    regime.validate()
    loadings = regime.loadings()
    children = np.random.SeedSequence(regime.seed).spawn(n_patients)
    width = max(len(str(n_patients - 1)), 4)
    records = []
    for i in range(n_patients):
        rng = np.random.Generator(np.random.PCG64(children[i]))
        rec = _generate_patient(rng, regime, loadings)
        rec.patient_id = f"p{i:0{width}d}"
        records.append(rec)
    lab_names = [f"lab{k:02d}" for k in range(regime.n_labs)]
    return Dataset(records=records, lab_names=lab_names)
