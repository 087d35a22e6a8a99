"""Scratch: criterion-8-style robustness contrast."""
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from scratch_calib import regime_for
from jointsurv.model import ModelConfig
from jointsurv.robustness import robustness_harness
from jointsurv.seeding import derive_seed
from jointsurv.synthgen import generate, shift_regime
from jointsurv.training import TrainConfig

SHIFT = {"base_gap_rate": 0.18, "miss_prob_base": 0.45}
N_GROUP = 1500


def one(args):
    variant, master = args
    base = regime_for(0)
    group_b = generate(N_GROUP, shift_regime(base, {"seed": derive_seed(master, "group-b")}))
    group_a = generate(N_GROUP, shift_regime(base, {**SHIFT, "seed": derive_seed(master, "group-a")}))
    cfg = TrainConfig(variant=variant, alpha=0.5, theta=2.0, learning_rate=1e-3,
                      batch_size=250, max_epochs=60, multitask_epochs=40,
                      patience=8, seed=0)
    mc = ModelConfig(n_labs=4, hidden=10, rnn_layers=1, head_layers=1, head_nodes=20)
    res = robustness_harness(group_a, group_b, variant, cfg, mc,
                             horizons=(1.0, 7.0), n_boot=30,
                             seed=derive_seed(master, f"rob-{variant}"))
    d1 = res.deltas[1.0][0]
    print(f"  {variant:18s} master={master} delta1d={d1:+.4f} "
          f"in={res.in_domain.rows[0].cindex_mean:.4f} "
          f"tr={res.transfer.rows[0].cindex_mean:.4f}", flush=True)
    return variant, master, d1


if __name__ == "__main__":
    t0 = time.time()
    jobs = [(v, m) for m in range(5) for v in ("Feature", "DeepJointFeature")]
    with ProcessPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(one, jobs))
    by = {}
    for v, m, d in results:
        by.setdefault(m, {})[v] = d
    wins = 0
    for m in sorted(by):
        dj, f = abs(by[m]["DeepJointFeature"]), abs(by[m]["Feature"])
        win = dj < f
        wins += win
        print(f"master={m}: |DJF|={dj:.4f} |Feature|={f:.4f} win={win}")
    print(f"wins: {wins}/5, wall {time.time()-t0:.0f}s")
