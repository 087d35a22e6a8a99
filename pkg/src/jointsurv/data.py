"""Patient data model and the preprocessing pipeline: loading, LOCF plus
patient-mean imputation, z-score normalisation, hourly resampling, patient
splits (random and weekday/weekend), oversampling and 24-hour windowing.

File formats (CSV, header row, UTF-8):
  longitudinal: patient_id, time_minutes, lab_name, value
                one row per observed measurement; missing = absent row;
                times must be strictly positive minutes since admission
  outcome:      patient_id, followup_days, event, admission_weekday,
                admission_hour
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np


class DataError(Exception):
    """Invalid input data; carries row-level messages."""

    def __init__(self, message, errors=None):
        self.errors = list(errors or [])
        if self.errors:
            preview = "; ".join(self.errors[:5])
            if len(self.errors) > 5:
                preview += f"; ... ({len(self.errors)} problems)"
            message = f"{message}: {preview}"
        super().__init__(message)


@dataclass
class PatientRecord:
    """One patient's irregular lab sequence plus the survival outcome.

    values holds NaN at unobserved coordinates until imputation; masks stay
    1 for observed entries even after imputation fills the NaNs.
    followup_days counts from admission until extract_window re-anchors it
    to the end of the observation window.
    """

    patient_id: str
    times_minutes: np.ndarray
    values: np.ndarray
    masks: np.ndarray
    followup_days: float
    event: int
    admission_weekday: int
    admission_hour: int

    @property
    def n_steps(self) -> int:
        return len(self.times_minutes)

    @property
    def gaps_minutes(self) -> np.ndarray:
        """Elapsed time per step; the first step's gap counts from admission."""
        return np.diff(self.times_minutes, prepend=0.0)

    def validate(self, n_labs):
        errors = []
        if self.values.shape != (self.n_steps, n_labs):
            errors.append(f"{self.patient_id}: value matrix shape mismatch")
        if np.any(np.diff(self.times_minutes) <= 0):
            errors.append(f"{self.patient_id}: observation times not strictly increasing")
        if self.n_steps and self.times_minutes[0] <= 0:
            errors.append(f"{self.patient_id}: first observation not after admission")
        observed = ~np.isnan(self.values)
        if not np.array_equal(observed, self.masks > 0):
            errors.append(f"{self.patient_id}: masks inconsistent with missing values")
        return errors


@dataclass
class NormalizationStats:
    """Per-lab mean/std of observed values plus gap statistics in hours."""

    lab_mean: np.ndarray
    lab_std: np.ndarray
    gap_mean_hours: float
    gap_std_hours: float


@dataclass
class Dataset:
    records: list = field(default_factory=list)
    lab_names: list = field(default_factory=list)
    stats: NormalizationStats | None = None

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def n_labs(self) -> int:
        return len(self.lab_names)

    def subset(self, indices) -> "Dataset":
        return Dataset(records=[self.records[i] for i in indices],
                       lab_names=list(self.lab_names), stats=self.stats)


# ---------------------------------------------------------------------------
# loading and writing


def _parse_float(text, what, line, errors):
    try:
        return float(text)
    except (TypeError, ValueError):
        errors.append(f"line {line}: bad {what} {text!r}")
        return None


def load_dataset(longitudinal_path, outcome_path) -> Dataset:
    """Load the two-file format, validating record invariants row by row."""
    errors = []
    outcomes = {}
    with open(outcome_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"patient_id", "followup_days", "event",
                    "admission_weekday", "admission_hour"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"outcome file missing required columns {sorted(required)}")
        for line, row in enumerate(reader, start=2):
            pid = row["patient_id"]
            follow = _parse_float(row["followup_days"], "followup_days", line, errors)
            event = _parse_float(row["event"], "event", line, errors)
            wd = _parse_float(row["admission_weekday"], "admission_weekday", line, errors)
            hr = _parse_float(row["admission_hour"], "admission_hour", line, errors)
            if None in (follow, event, wd, hr):
                continue
            if pid in outcomes:
                errors.append(f"line {line}: duplicate patient {pid!r}")
            if follow <= 1.0:
                errors.append(f"line {line}: followup_days must exceed the 1-day "
                              f"observation window, got {follow}")
            if event not in (0.0, 1.0):
                errors.append(f"line {line}: event must be 0 or 1, got {event}")
            if wd not in set(range(7)) or hr not in set(range(24)):
                errors.append(f"line {line}: bad admission weekday/hour")
            outcomes[pid] = (follow, int(event), int(wd), int(hr))

    raw = {}
    lab_set = set()
    with open(longitudinal_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"patient_id", "time_minutes", "lab_name", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"longitudinal file missing required columns {sorted(required)}")
        for line, row in enumerate(reader, start=2):
            pid = row["patient_id"]
            t = _parse_float(row["time_minutes"], "time_minutes", line, errors)
            v = _parse_float(row["value"], "value", line, errors)
            if t is None or v is None:
                continue
            if t <= 0:
                errors.append(f"line {line}: time_minutes must be positive, got {t}")
                continue
            if pid not in outcomes:
                errors.append(f"line {line}: patient {pid!r} has no outcome row")
                continue
            key = (t, row["lab_name"])
            entries = raw.setdefault(pid, {})
            if key in entries:
                errors.append(f"line {line}: duplicate measurement for {pid!r} {key}")
            entries[key] = v
            lab_set.add(row["lab_name"])

    if errors:
        raise DataError("invalid input data", errors)
    lab_names = sorted(lab_set)
    lab_index = {name: k for k, name in enumerate(lab_names)}
    records = []
    for pid in sorted(outcomes):
        entries = raw.get(pid)
        if not entries:
            errors.append(f"patient {pid!r}: no observations")
            continue
        times = np.array(sorted({t for t, _ in entries}), dtype=np.float64)
        step = {t: j for j, t in enumerate(times)}
        values = np.full((len(times), len(lab_names)), np.nan)
        for (t, lab), v in entries.items():
            values[step[t], lab_index[lab]] = v
        masks = (~np.isnan(values)).astype(np.float64)
        follow, event, wd, hr = outcomes[pid]
        rec = PatientRecord(patient_id=pid, times_minutes=times, values=values,
                            masks=masks, followup_days=follow, event=event,
                            admission_weekday=wd, admission_hour=hr)
        errors.extend(rec.validate(len(lab_names)))
        records.append(rec)
    if errors:
        raise DataError("invalid input data", errors)
    return Dataset(records=records, lab_names=lab_names)


def write_dataset(dataset: Dataset, longitudinal_path, outcome_path) -> None:
    with open(longitudinal_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "time_minutes", "lab_name", "value"])
        for rec in dataset.records:
            for j, t in enumerate(rec.times_minutes):
                for k, lab in enumerate(dataset.lab_names):
                    if rec.masks[j, k] > 0:
                        writer.writerow([rec.patient_id, f"{t:.6f}", lab,
                                         f"{rec.values[j, k]:.10g}"])
    with open(outcome_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "followup_days", "event",
                         "admission_weekday", "admission_hour"])
        for rec in dataset.records:
            writer.writerow([rec.patient_id, f"{rec.followup_days:.10g}", rec.event,
                             rec.admission_weekday, rec.admission_hour])


# ---------------------------------------------------------------------------
# imputation / normalisation / resampling


def impute_locf_patient_mean(record: PatientRecord) -> PatientRecord:
    """Fill missing entries with the last observed value of the same lab, or
    with the patient's within-window mean where nothing precedes. Masks are
    preserved so featurized modes can still see what was actually observed."""
    values = record.values.copy()
    n_steps, n_labs = values.shape
    for k in range(n_labs):
        col = values[:, k]
        observed = ~np.isnan(col)
        if not observed.any():
            raise DataError(f"patient {record.patient_id!r}: lab column {k} never "
                            "observed inside the window (cohort selection violation)")
        mean_k = col[observed].mean()
        last = np.nan
        for j in range(n_steps):
            if observed[j]:
                last = col[j]
            elif not np.isnan(last):
                col[j] = last
            else:
                col[j] = mean_k
    return replace(record, values=values)


def fit_normalization(dataset: Dataset) -> NormalizationStats:
    """Per-lab mean/std over observed entries of the given (training) records,
    plus mean/std of inter-observation gaps in hours. Stds floored at 1e-6."""
    k = dataset.n_labs
    sums = np.zeros(k)
    sq = np.zeros(k)
    counts = np.zeros(k)
    gaps = []
    for rec in dataset.records:
        obs = rec.masks > 0
        vals = np.where(obs, np.nan_to_num(rec.values), 0.0)
        sums += vals.sum(axis=0)
        sq += (vals * vals).sum(axis=0)
        counts += obs.sum(axis=0)
        gaps.append(rec.gaps_minutes / 60.0)
    counts = np.maximum(counts, 1.0)
    mean = sums / counts
    var = np.maximum(sq / counts - mean * mean, 0.0)
    std = np.maximum(np.sqrt(var), 1e-6)
    all_gaps = np.concatenate(gaps) if gaps else np.array([1.0])
    return NormalizationStats(lab_mean=mean, lab_std=std,
                              gap_mean_hours=float(all_gaps.mean()),
                              gap_std_hours=float(max(all_gaps.std(), 1e-6)))


def apply_normalization(record: PatientRecord, stats: NormalizationStats) -> PatientRecord:
    return replace(record, values=(record.values - stats.lab_mean) / stats.lab_std)


def invert_normalization(values, stats: NormalizationStats):
    return values * stats.lab_std + stats.lab_mean


def resample_hourly(record: PatientRecord, window_hours: int = 24) -> PatientRecord:
    """Sample the imputed step function on a regular hourly grid (1h..24h).

    Grid points before the first observation take the first imputed vector.
    """
    if np.isnan(record.values).any():
        raise DataError(f"patient {record.patient_id!r}: resampling requires imputed values")
    grid_minutes = 60.0 * np.arange(1, window_hours + 1)
    idx = np.searchsorted(record.times_minutes, grid_minutes, side="right") - 1
    idx = np.maximum(idx, 0)
    values = record.values[idx]
    return replace(record, times_minutes=grid_minutes, values=values,
                   masks=np.ones_like(values))


# ---------------------------------------------------------------------------
# splits


def split_random(dataset: Dataset, train_fraction: float = 0.9, seed: int = 0):
    """Patient-level partition with round(train_fraction * n) training patients."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(dataset.n)
    n_train = int(round(train_fraction * dataset.n))
    return dataset.subset(sorted(order[:n_train])), dataset.subset(sorted(order[n_train:]))


def hour_of_week(weekday: int, hour: int) -> int:
    return int(weekday) * 24 + int(hour)


def is_weekday_admission(weekday: int, hour: int) -> bool:
    """Weekday band runs from Monday 08:00 inclusive to Saturday 08:00 exclusive."""
    return 8 <= hour_of_week(weekday, hour) < 128


def split_weekday_weekend(dataset: Dataset):
    weekday = [i for i, r in enumerate(dataset.records)
               if is_weekday_admission(r.admission_weekday, r.admission_hour)]
    weekend = [i for i in range(dataset.n) if i not in set(weekday)]
    return dataset.subset(weekday), dataset.subset(weekend)


def oversample(dataset: Dataset, target_size: int, seed: int = 0) -> Dataset:
    """Resample with replacement up to target_size, keeping every original
    member at least once."""
    if target_size < dataset.n:
        raise ValueError(f"target size {target_size} below group size {dataset.n}")
    if target_size == dataset.n:
        return dataset.subset(range(dataset.n))
    rng = np.random.Generator(np.random.PCG64(seed))
    extra = rng.integers(0, dataset.n, size=target_size - dataset.n)
    return dataset.subset(list(range(dataset.n)) + [int(i) for i in extra])


def extract_window(record: PatientRecord, hours: float = 24.0) -> PatientRecord:
    """Drop observations after the window (inclusive boundary) and re-anchor
    the survival clock to the end of the window."""
    keep = record.times_minutes <= hours * 60.0
    if not keep.any():
        raise DataError(f"patient {record.patient_id!r}: no observations inside "
                        f"the {hours}h window")
    followup = record.followup_days - hours / 24.0
    if followup <= 0:
        raise DataError(f"patient {record.patient_id!r}: follow-up ends inside the window")
    return replace(record, times_minutes=record.times_minutes[keep],
                   values=record.values[keep], masks=record.masks[keep],
                   followup_days=followup)


def window_dataset(dataset: Dataset, hours: float = 24.0) -> Dataset:
    return Dataset(records=[extract_window(r, hours) for r in dataset.records],
                   lab_names=list(dataset.lab_names), stats=dataset.stats)


def lab_counts(record: PatientRecord) -> np.ndarray:
    """Number of observed measurements per lab within the record."""
    return record.masks.sum(axis=0)


def dataset_fingerprint(*paths) -> str:
    import hashlib

    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()
