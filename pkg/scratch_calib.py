"""Scratch calibration driver (not part of the package)."""
import sys
import time

import numpy as np

from jointsurv.data import split_random
from jointsurv.evaluation import c_index_td
from jointsurv.model import ModelConfig
from jointsurv.seeding import derive_seed
from jointsurv.synthgen import RegimeConfig, generate, shift_regime
from jointsurv.training import TrainConfig, predict, train


def regime_for(seed):
    return RegimeConfig(n_labs=4, base_gap_rate=0.35, severity_coupling=1.3,
                        lab_loadings=(1.0, 0.8, 0.6, 0.4),
                        miss_prob_base=0.3, miss_prob_slope=0.2,
                        noise_std=1.5, ar_coeff=0.95, ar_innovation_std=0.25,
                        hazard_base=0.04, hazard_coeff=1.3, seed=seed)


def run_one(variant, master, n_train=2000, n_test=500,
            stage1=40, stage2=20, alpha=0.5, hidden=10, nodes=20, batch=250):
    regime = regime_for(derive_seed(master, "data"))
    ds = generate(n_train + n_test, regime)
    tr, te = split_random(ds, n_train / (n_train + n_test), derive_seed(master, "split"))
    cfg = TrainConfig(variant=variant, alpha=alpha, theta=2.0, learning_rate=1e-3,
                      batch_size=batch, max_epochs=stage1 + stage2,
                      multitask_epochs=stage1, patience=8,
                      seed=derive_seed(master, "train"))
    mc = ModelConfig(n_labs=4, hidden=hidden, rnn_layers=1, head_layers=1,
                     head_nodes=nodes)
    t0 = time.time()
    tm = train(tr, cfg, mc)
    preds = predict(tm, te, (1.0, 7.0, 14.0))
    c1 = c_index_td(preds, 1.0)
    c7 = c_index_td(preds, 7.0)
    dt = time.time() - t0
    print(f"  {variant:18s} seed={master} C1={c1:.4f} C7={c7:.4f} "
          f"epochs={tm.stage_epochs} {dt:.1f}s", flush=True)
    return c1


if __name__ == "__main__":
    seeds = [int(s) for s in sys.argv[2:]] or [0]
    variants = sys.argv[1].split(",")
    results = {}
    for v in variants:
        results[v] = [run_one(v, s) for s in seeds]
    for v, cs in results.items():
        print(f"{v:18s} mean C1 = {np.mean(cs):.4f}")
