import dataclasses

import numpy as np
import pytest

from jointsurv.data import load_dataset, write_dataset
from jointsurv.model import ConfigError
from jointsurv.synthgen import RegimeConfig, generate, shift_regime

N_MC = 5000


def base_regime(**overrides):
    defaults = dict(n_labs=2, base_gap_rate=0.4, severity_coupling=1.0,
                    miss_prob_base=0.25, miss_prob_slope=0.1, noise_std=0.5,
                    ar_coeff=0.9, ar_innovation_std=0.3, hazard_base=0.03,
                    hazard_coeff=1.0, censor_horizon_days=30.0, seed=123)
    defaults.update(overrides)
    return RegimeConfig(**defaults)


@pytest.fixture(scope="module")
def cohort_coupled():
    return generate(N_MC, base_regime())


@pytest.fixture(scope="module")
def cohort_uncoupled():
    return generate(N_MC, base_regime(severity_coupling=0.0, seed=321))


def _counts(ds):
    return np.array([r.n_steps for r in ds.records], dtype=float)


def _event_by(ds, days):
    t = np.array([r.followup_days for r in ds.records])
    d = np.array([r.event for r in ds.records])
    return ((t <= days) & (d == 1)).astype(float)


def test_same_seed_bit_identical():
    a = generate(40, base_regime())
    b = generate(40, base_regime())
    for ra, rb in zip(a.records, b.records):
        assert ra.patient_id == rb.patient_id
        assert np.array_equal(ra.times_minutes, rb.times_minutes)
        assert np.array_equal(ra.masks, rb.masks)
        obs = ra.masks > 0
        assert np.array_equal(ra.values[obs], rb.values[obs])
        assert ra.followup_days == rb.followup_days
        assert ra.event == rb.event


def test_noiseless_values_load_on_shared_severity():
    regime = base_regime(noise_std=0.0, lab_loadings=(1.0, 2.0), seed=9)
    ds = generate(50, regime)
    checked = 0
    for rec in ds.records:
        both = (rec.masks[:, 0] > 0) & (rec.masks[:, 1] > 0)
        if both.any():
            np.testing.assert_allclose(rec.values[both, 1],
                                       2.0 * rec.values[both, 0], atol=1e-12)
            checked += both.sum()
    assert checked > 10


def test_record_invariants_hold(cohort_coupled):
    for rec in cohort_coupled.records[:500]:
        assert rec.n_steps >= 1
        assert np.all(rec.gaps_minutes > 0)
        assert rec.times_minutes[0] > 0
        assert rec.times_minutes[-1] <= 24 * 60
        assert rec.followup_days > 1.0  # survived the observation window
        assert rec.validate(cohort_coupled.n_labs) == []
        assert rec.masks.sum(axis=0).min() >= 1  # every lab observed once


def test_round_trips_through_loader(tmp_path, cohort_coupled):
    subset = dataclasses.replace(cohort_coupled,
                                 records=cohort_coupled.records[:30])
    write_dataset(subset, tmp_path / "l.csv", tmp_path / "o.csv")
    loaded = load_dataset(tmp_path / "l.csv", tmp_path / "o.csv")
    assert loaded.n == 30
    assert loaded.lab_names == subset.lab_names


def test_uncoupled_regime_breaks_count_outcome_link(cohort_uncoupled):
    corr = np.corrcoef(_counts(cohort_uncoupled), _event_by(cohort_uncoupled, 15.0))[0, 1]
    assert abs(corr) <= 0.03


def test_coupled_regime_creates_informative_presence(cohort_coupled):
    corr = np.corrcoef(_counts(cohort_coupled), _event_by(cohort_coupled, 15.0))[0, 1]
    assert corr > 0.05


def test_shift_empty_overrides_is_identity():
    regime = base_regime()
    assert shift_regime(regime, {}) == regime


def test_shift_halving_rate_halves_counts(cohort_coupled):
    halved = shift_regime(base_regime(), {"base_gap_rate": 0.2, "seed": 555})
    ds = generate(N_MC, halved)
    ratio = _counts(ds).mean() / _counts(cohort_coupled).mean()
    assert abs(ratio - 0.5) < 0.05 * 0.5 + 0.02


def test_shift_preserves_outcome_marginal(cohort_coupled):
    shifted = shift_regime(base_regime(), {"base_gap_rate": 0.2,
                                           "miss_prob_base": 0.45, "seed": 777})
    ds = generate(N_MC, shifted)
    rate_a = _event_by(cohort_coupled, 15.0).mean()
    rate_b = _event_by(ds, 15.0).mean()
    assert abs(rate_a - rate_b) <= 0.015


def test_shift_rejects_outcome_fields():
    for bad in ({"hazard_base": 0.1}, {"hazard_coeff": 2.0}, {"ar_coeff": 0.5},
                {"noise_std": 2.0}, {"censor_horizon_days": 10.0}):
        with pytest.raises(ConfigError):
            shift_regime(base_regime(), bad)


def test_invalid_regime_fields_error():
    with pytest.raises(ConfigError):
        RegimeConfig(base_gap_rate=0.0).validate()
    with pytest.raises(ConfigError):
        RegimeConfig(ar_coeff=1.0).validate()
    with pytest.raises(ConfigError):
        RegimeConfig(miss_prob_base=1.0).validate()
    with pytest.raises(ConfigError):
        RegimeConfig(censor_horizon_days=0.5).validate()
    with pytest.raises(ConfigError):
        generate(0, base_regime())


def test_admission_profiles_respect_bands():
    from jointsurv.data import is_weekday_admission

    wk = generate(60, base_regime(admission_profile="weekday", seed=5))
    we = generate(60, base_regime(admission_profile="weekend", seed=6))
    assert all(is_weekday_admission(r.admission_weekday, r.admission_hour)
               for r in wk.records)
    assert not any(is_weekday_admission(r.admission_weekday, r.admission_hour)
                   for r in we.records)
