"""Multi-task training loop: per-sequence losses, dynamic weight averaging
across the three observation-process tasks, alpha-mixing with the survival
loss, early stopping, and the two fine-tuning regimes.

Patients are padded into per-step batches so every matrix op runs over the
whole batch; step-validity masks remove padding from the losses and a
one-hot combination selects each patient's final embedding.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import heads as hd
from .autodiff import AdamState, Node, adam_step, backward
from .data import (DataError, Dataset, NormalizationStats, apply_normalization,
                   fit_normalization, impute_locf_patient_mean, split_random,
                   window_dataset)
from .encoder import GrudInputs, InputMode, assemble_inputs, grud_forward, lstm_forward
from .evaluation import PredictionSet
from .heads import BaselineHazard, breslow_baseline, cox_partial_nll
from .model import ConfigError, Model, ModelConfig, variant_spec
from .seeding import derive_seed, generator


@dataclass
class TrainConfig:
    variant: str = "DeepJointFeature"
    alpha: float = 0.1
    theta: float = 2.0
    learning_rate: float = 1e-3
    batch_size: int = 100
    max_epochs: int = 1000
    multitask_epochs: int = 500
    patience: int = 10
    validation_fraction: float = 0.10
    seed: int = 0
    window_hours: float = 24.0

    def validate(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.theta <= 0:
            raise ConfigError("theta must be positive")
        if self.multitask_epochs > self.max_epochs:
            raise ConfigError("multitask_epochs cannot exceed max_epochs")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.batch_size < 1 or self.learning_rate <= 0 or self.patience < 1:
            raise ConfigError("bad batch_size / learning_rate / patience")
        variant_spec(self.variant)


@dataclass
class LossHistory:
    """Per-epoch training averages, validation loss and the DWA weights."""

    epochs: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    loss_long: list = field(default_factory=list)
    loss_tpp: list = field(default_factory=list)
    loss_miss: list = field(default_factory=list)
    loss_surv: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    shifts: list = field(default_factory=list)

    def append(self, epoch, stage, tasks, val, w, shift):
        self.epochs.append(epoch)
        self.stages.append(stage)
        self.loss_long.append(tasks["long"])
        self.loss_tpp.append(tasks["tpp"])
        self.loss_miss.append(tasks["miss"])
        self.loss_surv.append(tasks["surv"])
        self.val_loss.append(val)
        self.weights.append(tuple(w))
        self.shifts.append(tuple(shift))

    def to_rows(self):
        header = ["epoch", "stage", "loss_long", "loss_tpp", "loss_miss",
                  "loss_surv", "val_loss", "w_long", "w_tpp", "w_miss",
                  "shift_long", "shift_tpp", "shift_miss"]
        rows = [header]
        for i in range(len(self.epochs)):
            w = self.weights[i]
            s = self.shifts[i]
            rows.append([self.epochs[i], self.stages[i],
                         f"{self.loss_long[i]:.10g}", f"{self.loss_tpp[i]:.10g}",
                         f"{self.loss_miss[i]:.10g}", f"{self.loss_surv[i]:.10g}",
                         f"{self.val_loss[i]:.10g}",
                         f"{w[0]:.10g}", f"{w[1]:.10g}", f"{w[2]:.10g}",
                         f"{s[0]:.10g}", f"{s[1]:.10g}", f"{s[2]:.10g}"])
        return rows


def dwa_weights(prev, cur, theta):
    """Softmax over log loss ratios for the three observation-process tasks.

    prev/cur must be positive (the trainer shifts raw losses first); passing
    prev=None yields the uniform weights used for the first two epochs.
    """
    if prev is None:
        return np.full(3, 1.0 / 3.0)
    prev = np.asarray(prev, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    if np.any(prev <= 0) or np.any(cur <= 0):
        raise ValueError("dwa_weights requires positive losses; shift them first")
    logits = np.log(cur / (prev * theta))
    logits = logits - logits.max()
    w = np.exp(logits)
    return w / w.sum()


def combined_loss(l_surv, l_long, l_tpp, l_miss, weights, alpha):
    """(1 - alpha) * survival + alpha * (weighted observation-process sum)."""
    w = np.asarray(weights, dtype=np.float64)
    presence = w[0] * l_long + w[1] * l_tpp + w[2] * l_miss
    return (1.0 - alpha) * l_surv + alpha * presence


# ---------------------------------------------------------------------------
# batching


@dataclass
class PreparedPatient:
    """Constant per-patient arrays, assembled once per training run."""

    enc_steps: np.ndarray | None      # (L, D) for LSTM modes
    grud: GrudInputs | None
    static: np.ndarray | None
    values: np.ndarray                # (L, K) imputed + normalised
    masks: np.ndarray                 # (L, K) true observation masks
    gaps_hours: np.ndarray            # (L,) elapsed time per step
    time_days: float
    event: int

    @property
    def n_steps(self) -> int:
        return len(self.gaps_hours)

    @property
    def enc_len(self) -> int:
        if self.enc_steps is not None:
            return self.enc_steps.shape[0]
        if self.grud is not None:
            return self.grud.values.shape[0]
        return 0


def prepare_patient(record, spec, stats, feature_means) -> PreparedPatient:
    built = assemble_inputs(record, spec.mode, stats=stats, feature_means=feature_means)
    enc_steps = grud = static = None
    if spec.mode == InputMode.GRUD_STYLE:
        grud = built
    elif spec.encoder == "none":
        static = built
    else:
        enc_steps = built
    return PreparedPatient(enc_steps=enc_steps, grud=grud, static=static,
                           values=record.values.copy(), masks=record.masks.copy(),
                           gaps_hours=record.gaps_minutes / 60.0,
                           time_days=record.followup_days, event=record.event)


@dataclass
class Batch:
    patients: list
    times: np.ndarray
    events: np.ndarray
    # sequence-mode payload
    steps: list | None = None           # per step (B, D)
    grud_steps: tuple | None = None     # (values, masks, deltas, last) lists
    final_onehot: list | None = None    # per step (B, 1)
    pred_valid: np.ndarray | None = None  # (Lm-1, B)
    next_values: np.ndarray | None = None  # (Lm-1, B, K)
    next_masks: np.ndarray | None = None
    next_gaps: np.ndarray | None = None    # (Lm-1, B, 1)
    static: np.ndarray | None = None


def make_batch(patients, spec) -> Batch:
    times = np.array([p.time_days for p in patients])
    events = np.array([p.event for p in patients], dtype=np.float64)
    if spec.encoder == "none":
        return Batch(patients=patients, times=times, events=events,
                     static=np.stack([p.static for p in patients]))
    b = len(patients)
    lmax = max(p.enc_len for p in patients)
    lens = np.array([p.enc_len for p in patients])
    final_onehot = [((lens - 1) == j).astype(np.float64)[:, None] for j in range(lmax)]
    batch = Batch(patients=patients, times=times, events=events,
                  final_onehot=final_onehot)
    if spec.mode == InputMode.GRUD_STYLE:
        k = patients[0].grud.values.shape[1]
        vals, msks, dels, lasts = [], [], [], []
        for j in range(lmax):
            v = np.zeros((b, k)); m = np.zeros((b, k))
            d = np.zeros((b, k)); lo = np.zeros((b, k))
            for i, p in enumerate(patients):
                if j < p.enc_len:
                    v[i] = p.grud.values[j]
                    m[i] = p.grud.masks[j]
                    d[i] = p.grud.deltas[j]
                    lo[i] = p.grud.last_observed[j]
            vals.append(v); msks.append(m); dels.append(d); lasts.append(lo)
        batch.grud_steps = (vals, msks, dels, lasts)
    else:
        d = patients[0].enc_steps.shape[1]
        steps = []
        for j in range(lmax):
            x = np.zeros((b, d))
            for i, p in enumerate(patients):
                if j < p.enc_len:
                    x[i] = p.enc_steps[j]
            steps.append(x)
        batch.steps = steps
    if spec.presence and lmax >= 2:
        k = patients[0].values.shape[1]
        pv = np.zeros((lmax - 1, b))
        nv = np.zeros((lmax - 1, b, k))
        nm = np.zeros((lmax - 1, b, k))
        ng = np.ones((lmax - 1, b, 1))
        for i, p in enumerate(patients):
            for j in range(p.n_steps - 1):
                pv[j, i] = 1.0
                nv[j, i] = p.values[j + 1]
                nm[j, i] = p.masks[j + 1]
                ng[j, i, 0] = p.gaps_hours[j + 1]
        batch.pred_valid = pv
        batch.next_values = nv
        batch.next_masks = nm
        batch.next_gaps = ng
    return batch


# ---------------------------------------------------------------------------
# forward losses


def _encode(model: Model, batch: Batch):
    if model.spec.mode == InputMode.GRUD_STYLE:
        vals, msks, dels, lasts = batch.grud_steps
        return grud_forward(model.grud, vals, msks, dels, lasts)
    return lstm_forward(model.lstm, [Node(x) for x in batch.steps])


def _final_embedding(hidden_steps, final_onehot) -> Node:
    final = hidden_steps[0] * Node(final_onehot[0])
    for h, oh in zip(hidden_steps[1:], final_onehot[1:]):
        final = final + h * Node(oh)
    return final


def _presence_totals(model: Model, hidden_steps, batch: Batch):
    """Per-patient loss sums over prediction steps as (B,) Nodes, plus the
    per-patient step counts. Steps for every patient are stacked into one
    matrix so each head runs a single batched pass."""
    b = batch.times.size
    if batch.pred_valid is None:
        zero = Node(np.zeros(b))
        return zero, zero, zero, np.zeros(b)
    j_steps = batch.pred_valid.shape[0]
    h_big = ad.concat(hidden_steps[:j_steps], axis=0)
    gaps_big = Node(batch.next_gaps.reshape(-1, 1))
    head_in = ad.concat([h_big, gaps_big], axis=1)
    k = batch.next_values.shape[2]
    next_vals = batch.next_values.reshape(-1, k)
    next_masks = batch.next_masks.reshape(-1, k)
    pv = batch.pred_valid.reshape(-1)

    mu, sigma = model.head_long.forward(head_in)
    rows_long = hd.longitudinal_nll(mu, sigma, next_vals, next_masks)
    probs = model.head_miss.forward(head_in)
    rows_miss = hd.missingness_nll(probs, next_masks)
    rows_tpp = model.head_tpp.nll_rows(h_big, gaps_big)

    def per_patient(rows):
        masked = rows * Node(pv)
        return ad.sum_axis(ad.reshape(masked, (j_steps, b)), axis=0)

    counts = batch.pred_valid.sum(axis=0)
    return (per_patient(rows_long), per_patient(rows_tpp), per_patient(rows_miss),
            counts)


@dataclass
class BatchLosses:
    surv: Node
    long: Node
    tpp: Node
    miss: Node
    n_events: int
    final_h: Node | None
    presence_counts: np.ndarray | None


def forward_losses(model: Model, batch: Batch, with_presence: bool) -> BatchLosses:
    """All task losses for one batch. The survival loss is the Cox partial
    NLL over the batch risk set, scaled per event; the observation-process
    losses are averaged per patient and then over patients with at least one
    prediction step."""
    zero = Node(0.0)
    if model.spec.encoder == "none":
        scores = model.head_surv.forward(Node(batch.static))
        final_h = None
    else:
        hidden_steps = _encode(model, batch)
        final_h = _final_embedding(hidden_steps, batch.final_onehot)
        scores = model.head_surv.forward(final_h)
    n_events = int(np.sum(batch.events > 0))
    l_surv = cox_partial_nll(scores, batch.times, batch.events) * (1.0 / max(n_events, 1))
    l_long = l_tpp = l_miss = zero
    counts = None
    if with_presence and model.spec.presence:
        totals_long, totals_tpp, totals_miss, counts = _presence_totals(
            model, hidden_steps, batch)
        has = (counts > 0).astype(np.float64)
        denom = max(has.sum(), 1.0)
        safe = np.maximum(counts, 1.0)

        def batch_mean(totals):
            return ad.total_sum(totals * Node(has / safe)) * (1.0 / denom)

        l_long = batch_mean(totals_long)
        l_tpp = batch_mean(totals_tpp)
        l_miss = batch_mean(totals_miss)
    return BatchLosses(surv=l_surv, long=l_long, tpp=l_tpp, miss=l_miss,
                       n_events=n_events, final_h=final_h, presence_counts=counts)


def sequence_losses(model: Model, prepared: PreparedPatient):
    """Observation-process loss sums and the final embedding for one patient.

    A single-step record has no prediction steps, so all three sums are zero
    while the embedding is still produced.
    """
    batch = make_batch([prepared], model.spec)
    if model.spec.encoder == "none":
        raise ConfigError("sequence losses are undefined for static variants")
    hidden_steps = _encode(model, batch)
    final_h = _final_embedding(hidden_steps, batch.final_onehot)
    if not model.spec.presence:
        return {"long": 0.0, "tpp": 0.0, "miss": 0.0}, final_h.value[0]
    totals_long, totals_tpp, totals_miss, _ = _presence_totals(model, hidden_steps, batch)
    return ({"long": float(totals_long.value[0]),
             "tpp": float(totals_tpp.value[0]),
             "miss": float(totals_miss.value[0])},
            final_h.value[0])


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class TrainedModel:
    model: Model
    config: TrainConfig
    model_config: ModelConfig
    stats: NormalizationStats
    feature_means: np.ndarray
    baseline: BaselineHazard
    lab_names: list
    history: LossHistory
    stage1_params: dict
    stage_epochs: dict


def _observed_means(dataset: Dataset) -> np.ndarray:
    total = np.zeros(dataset.n_labs)
    count = np.zeros(dataset.n_labs)
    for rec in dataset.records:
        obs = rec.masks > 0
        total += np.where(obs, rec.values, 0.0).sum(axis=0)
        count += obs.sum(axis=0)
    return total / np.maximum(count, 1.0)


def _epoch_batches(prepared, spec, batch_size, rng):
    order = rng.permutation(len(prepared))
    for start in range(0, len(prepared), batch_size):
        idx = order[start:start + batch_size]
        yield make_batch([prepared[i] for i in idx], spec)


class _EarlyStopper:
    def __init__(self, patience):
        self.patience = patience
        self.best = np.inf
        self.stale = 0
        self.snapshot = None

    def update(self, value, model) -> bool:
        """Record the epoch; returns True when the stage should halt."""
        if value < self.best:
            self.best = value
            self.stale = 0
            self.snapshot = model.snapshot()
        else:
            self.stale += 1
        return self.stale >= self.patience


def _run_stage(model, prepared_fit, prepared_val, config, stage, history,
               start_epoch, n_epochs, trainable, use_presence, alpha):
    spec = model.spec
    rng_shuffle = generator(config.seed, f"shuffle-stage{stage}")
    adam = AdamState(lr=config.learning_rate)
    stopper = _EarlyStopper(config.patience)
    stopper.snapshot = model.snapshot()
    val_batch = make_batch(prepared_val, spec) if prepared_val else None
    task_history = {"long": [], "tpp": [], "miss": []}
    running_min = {"long": np.inf, "tpp": np.inf, "miss": np.inf}
    epochs_run = 0
    for epoch_idx in range(n_epochs):
        epoch = start_epoch + epoch_idx
        weights = np.full(3, 1.0 / 3.0)
        shifts = (0.0, 0.0, 0.0)
        if use_presence and len(task_history["long"]) >= 2:
            shifts = tuple(running_min[t] - 1.0 for t in ("long", "tpp", "miss"))
            prev = np.array([task_history[t][-2] - s
                             for t, s in zip(("long", "tpp", "miss"), shifts)])
            cur = np.array([task_history[t][-1] - s
                            for t, s in zip(("long", "tpp", "miss"), shifts)])
            weights = dwa_weights(prev, cur, config.theta)
        sums = {"long": 0.0, "tpp": 0.0, "miss": 0.0, "surv": 0.0}
        n_batches = 0
        for batch in _epoch_batches(prepared_fit, spec, config.batch_size, rng_shuffle):
            losses = forward_losses(model, batch, use_presence)
            if use_presence:
                loss = combined_loss(losses.surv, losses.long, losses.tpp,
                                     losses.miss, weights, alpha)
            else:
                loss = losses.surv
            grads = backward(loss, trainable)
            adam_step(trainable, grads, adam)
            sums["long"] += losses.long.item()
            sums["tpp"] += losses.tpp.item()
            sums["miss"] += losses.miss.item()
            sums["surv"] += losses.surv.item()
            n_batches += 1
        avg = {k: v / max(n_batches, 1) for k, v in sums.items()}
        if use_presence:
            for t in ("long", "tpp", "miss"):
                task_history[t].append(avg[t])
                running_min[t] = min(running_min[t], avg[t])
        if val_batch is not None:
            val_losses = forward_losses(model, val_batch, use_presence)
            if use_presence:
                val = combined_loss(val_losses.surv.item(), val_losses.long.item(),
                                    val_losses.tpp.item(), val_losses.miss.item(),
                                    weights, alpha)
            else:
                val = val_losses.surv.item()
        else:
            val = avg["surv"] if not use_presence else combined_loss(
                avg["surv"], avg["long"], avg["tpp"], avg["miss"], weights, alpha)
        history.append(epoch, stage, avg, val, weights, shifts)
        epochs_run += 1
        if stopper.update(val, model):
            break
    model.restore(stopper.snapshot)
    return epochs_run


def train(dataset: Dataset, config: TrainConfig,
          model_config: ModelConfig | None = None) -> TrainedModel:
    """Full protocol: multi-task stage with early stopping, then a survival
    fine-tune with everything else frozen (or a full unfreeze for the
    fine-tune variant). The Breslow baseline is fitted on the whole training
    population afterwards."""
    config.validate()
    if dataset.n == 0:
        raise DataError("empty training set")
    spec = variant_spec(config.variant)
    model_config = model_config or ModelConfig(n_labs=dataset.n_labs)
    if model_config.n_labs != dataset.n_labs:
        raise ConfigError(f"model expects {model_config.n_labs} labs, "
                          f"dataset has {dataset.n_labs}")

    windowed = window_dataset(dataset, config.window_hours)
    imputed = Dataset([impute_locf_patient_mean(r) for r in windowed.records],
                      windowed.lab_names)
    if not any(r.event for r in imputed.records):
        raise DataError("all-censored training set")
    stats = fit_normalization(imputed)
    normalized = Dataset([apply_normalization(r, stats) for r in imputed.records],
                         imputed.lab_names, stats)
    means = _observed_means(normalized)

    fit_ds, val_ds = split_random(normalized, 1.0 - config.validation_fraction,
                                  derive_seed(config.seed, "valsplit"))
    if fit_ds.n == 0:
        raise DataError("validation split left no training patients")
    if val_ds.n == 0:
        warnings.warn("validation split is empty; stopping on training loss")

    model = Model(config.variant, model_config, generator(config.seed, "init"),
                  feature_means=means)
    prepared_fit = [prepare_patient(r, spec, stats, means) for r in fit_ds.records]
    prepared_val = [prepare_patient(r, spec, stats, means) for r in val_ds.records]

    history = LossHistory()
    stage1_epochs = _run_stage(
        model, prepared_fit, prepared_val, config, stage=1, history=history,
        start_epoch=1, n_epochs=config.multitask_epochs,
        trainable=model.parameters(), use_presence=spec.presence,
        alpha=config.alpha)
    stage1_params = model.snapshot()

    stage2_budget = config.max_epochs - config.multitask_epochs
    stage2_epochs = 0
    if stage2_budget > 0:
        trainable = (model.parameters() if spec.finetune_all
                     else model.survival_parameters())
        stage2_epochs = _run_stage(
            model, prepared_fit, prepared_val, config, stage=2, history=history,
            start_epoch=config.multitask_epochs + 1, n_epochs=stage2_budget,
            trainable=trainable, use_presence=False, alpha=0.0)

    prepared_all = [prepare_patient(r, spec, stats, means) for r in normalized.records]
    scores = _scores_for(model, prepared_all)
    baseline = breslow_baseline(scores,
                                np.array([p.time_days for p in prepared_all]),
                                np.array([p.event for p in prepared_all]))
    return TrainedModel(model=model, config=config, model_config=model_config,
                        stats=stats, feature_means=means, baseline=baseline,
                        lab_names=list(dataset.lab_names), history=history,
                        stage1_params=stage1_params,
                        stage_epochs={"stage1": stage1_epochs, "stage2": stage2_epochs})


def _scores_for(model: Model, prepared, chunk: int = 500) -> np.ndarray:
    out = []
    for start in range(0, len(prepared), chunk):
        batch = make_batch(prepared[start:start + chunk], model.spec)
        if model.spec.encoder == "none":
            scores = model.head_surv.forward(Node(batch.static))
        else:
            hs = _encode(model, batch)
            scores = model.head_surv.forward(_final_embedding(hs, batch.final_onehot))
        out.append(scores.value.copy())
    return np.concatenate(out) if out else np.zeros(0)


def predict(trained: TrainedModel, dataset: Dataset, horizons) -> PredictionSet:
    """Risk predictions for a raw dataset, using the training-set statistics.

    Horizons are days after the observation window; risk = 1 - S(tau | x).
    """
    if list(dataset.lab_names) != list(trained.lab_names):
        missing = sorted(set(trained.lab_names) ^ set(dataset.lab_names))
        raise DataError(f"lab schema mismatch; offending labs: {missing}")
    spec = trained.model.spec
    windowed = window_dataset(dataset, trained.config.window_hours)
    prepared = [prepare_patient(apply_normalization(impute_locf_patient_mean(r),
                                                    trained.stats),
                                spec, trained.stats, trained.feature_means)
                for r in windowed.records]
    scores = _scores_for(trained.model, prepared)
    horizons = np.asarray(horizons, dtype=np.float64)
    lam0 = trained.baseline.cumulative(horizons)
    surv = np.exp(-np.outer(np.exp(scores), lam0))
    return PredictionSet(horizons=horizons, risks=1.0 - surv, surv=surv,
                         times=np.array([p.time_days for p in prepared]),
                         events=np.array([p.event for p in prepared], dtype=np.float64))


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(trained: TrainedModel, path) -> None:
    """Single self-describing archive: parameter tensors keyed by name, the
    normalisation statistics, baseline-hazard knots and the configs."""
    meta = {
        "variant": trained.config.variant,
        "train_config": vars(trained.config).copy(),
        "model_config": vars(trained.model_config).copy(),
        "lab_names": list(trained.lab_names),
        "stage_epochs": trained.stage_epochs,
    }
    arrays = {f"param/{name}": p.value for name, p in trained.model.param_dict().items()}
    arrays["stats/lab_mean"] = trained.stats.lab_mean
    arrays["stats/lab_std"] = trained.stats.lab_std
    arrays["stats/gap"] = np.array([trained.stats.gap_mean_hours,
                                    trained.stats.gap_std_hours])
    arrays["baseline/times"] = trained.baseline.times
    arrays["baseline/values"] = trained.baseline.values
    arrays["feature_means"] = trained.feature_means
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(path) -> TrainedModel:
    archive = np.load(path, allow_pickle=False)
    meta = json.loads(str(archive["meta"]))
    config = TrainConfig(**meta["train_config"])
    model_config = ModelConfig(**meta["model_config"])
    means = archive["feature_means"]
    model = Model(config.variant, model_config, generator(0, "checkpoint-load"),
                  feature_means=means)
    params = model.param_dict()
    for key in archive.files:
        if key.startswith("param/"):
            name = key[len("param/"):]
            if name not in params:
                raise ConfigError(f"checkpoint parameter {name!r} not in model")
            if params[name].value.shape != archive[key].shape:
                raise ConfigError(f"checkpoint parameter {name!r} has wrong shape")
            params[name].value = archive[key].astype(np.float64)
    gap = archive["stats/gap"]
    stats = NormalizationStats(lab_mean=archive["stats/lab_mean"],
                               lab_std=archive["stats/lab_std"],
                               gap_mean_hours=float(gap[0]),
                               gap_std_hours=float(gap[1]))
    baseline = BaselineHazard(times=archive["baseline/times"],
                              values=archive["baseline/values"])
    return TrainedModel(model=model, config=config, model_config=model_config,
                        stats=stats, feature_means=means, baseline=baseline,
                        lab_names=meta["lab_names"], history=LossHistory(),
                        stage1_params={}, stage_epochs=meta["stage_epochs"])
