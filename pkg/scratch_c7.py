"""Scratch: full criterion-7-style run with a 4-worker pool."""
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from scratch_calib import run_one

JOBS = [(v, s) for v in ("Ignore", "Feature", "DeepJointFeature") for s in range(5)]


def work(job):
    v, s = job
    return (v, s, run_one(v, s))


if __name__ == "__main__":
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(work, JOBS))
    by_variant = {}
    for v, s, c1 in results:
        by_variant.setdefault(v, {})[s] = c1
    for v in by_variant:
        vals = [by_variant[v][s] for s in range(5)]
        print(v, [f"{c:.4f}" for c in vals], f"mean={np.mean(vals):.4f}")
    gap_f = np.mean([by_variant["Feature"][s] - by_variant["Ignore"][s] for s in range(5)])
    gap_d = np.mean([by_variant["DeepJointFeature"][s] - by_variant["Ignore"][s] for s in range(5)])
    print(f"mean gap Feature-Ignore: {gap_f:.4f}")
    print(f"mean gap DJF-Ignore:     {gap_d:.4f}")
    print(f"total wall: {time.time()-t0:.0f}s")
