"""Paired transfer-robustness harness: an in-domain model and a transferred
model are evaluated on the same held-out test set so their metric deltas
isolate the effect of the observation-process shift."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, oversample, split_random
from .evaluation import MetricReport, evaluate_predictions
from .model import ModelConfig
from .seeding import derive_seed
from .training import TrainConfig, predict, train


@dataclass
class RobustnessResult:
    variant: str
    in_domain: MetricReport
    transfer: MetricReport
    deltas: dict  # horizon -> (cindex delta, brier delta), transfer minus in-domain


def robustness_harness(group_a: Dataset, group_b: Dataset, variant: str,
                       config: TrainConfig, model_config: ModelConfig | None = None,
                       horizons=(1.0, 7.0, 14.0), n_boot: int = 100,
                       train_fraction: float = 0.9, oversample_to_match: bool = True,
                       seed: int = 0) -> RobustnessResult:
    """Train on B-train and on A-train (optionally oversampled to the size of
    B-train), evaluate both on B-test, and report per-horizon differences.

    Both arms share the same split/train/bootstrap sub-seeds (common random
    numbers), so identical groups produce exactly identical arms and the
    deltas isolate the data difference rather than seed noise."""
    if group_a.n < 2 or group_b.n < 2:
        raise ValueError("each group needs at least 2 patients to split")
    split_seed = derive_seed(seed, "split")
    a_train, _ = split_random(group_a, train_fraction, split_seed)
    b_train, b_test = split_random(group_b, train_fraction, split_seed)
    if a_train.n == 0 or b_train.n == 0 or b_test.n == 0:
        raise ValueError("group too small to split")
    if oversample_to_match and a_train.n < b_train.n:
        a_train = oversample(a_train, b_train.n, derive_seed(seed, "oversample"))

    def run(train_ds, label):
        cfg = TrainConfig(**{**vars(config),
                             "variant": variant,
                             "seed": derive_seed(seed, "train")})
        trained = train(train_ds, cfg, model_config)
        preds = predict(trained, b_test, horizons)
        return evaluate_predictions(preds, label=label, n_boot=n_boot,
                                    seed=derive_seed(seed, "boot"))

    in_domain = run(b_train, f"{variant}/in_domain")
    transfer = run(a_train, f"{variant}/transfer")
    deltas = {}
    for row_in, row_tr in zip(in_domain.rows, transfer.rows):
        deltas[row_in.horizon] = (row_tr.cindex_mean - row_in.cindex_mean,
                                  row_tr.brier_mean - row_in.brier_mean)
    return RobustnessResult(variant=variant, in_domain=in_domain,
                            transfer=transfer, deltas=deltas)


def delta_table_rows(results) -> list:
    """Flat rows mirroring the transfer-difference tables: one row per
    variant, C-index and Brier deltas per horizon."""
    if not results:
        return []
    horizons = sorted(results[0].deltas)
    header = ["variant"]
    for tau in horizons:
        header += [f"cindex_delta_{tau:g}d", f"brier_delta_{tau:g}d"]
    rows = [header]
    for res in results:
        row = [res.variant]
        for tau in horizons:
            dc, db = res.deltas[tau]
            row += [f"{dc:.6f}", f"{db:.6f}"]
        rows.append(row)
    return rows
