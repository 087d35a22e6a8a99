"""End-to-end gradient verification: every head NLL and the combined loss on
a randomized tiny model, checked against central finite differences."""
from __future__ import annotations

import numpy as np

from .autodiff import finite_difference_check
from .model import Model, ModelConfig
from .seeding import generator
from .training import (PreparedPatient, combined_loss, forward_losses, make_batch)


def _toy_patients(rng, n_labs=2):
    patients = []
    for lengths, event, t_days in (((4,), 1, 3.0), ((3,), 1, 9.5), ((2,), 0, 14.0)):
        steps = lengths[0]
        values = rng.normal(0.0, 1.0, size=(steps, n_labs))
        masks = (rng.uniform(size=(steps, n_labs)) < 0.7).astype(np.float64)
        masks[0, 0] = 1.0
        gaps = rng.uniform(0.5, 5.0, size=steps)
        feats = np.concatenate([values, masks, gaps[:, None]], axis=1)
        patients.append(PreparedPatient(
            enc_steps=feats, grud=None, static=None, values=values, masks=masks,
            gaps_hours=gaps, time_days=t_days, event=event))
    return patients


def run_gradcheck(seed: int = 0, step: float = 1e-5, tolerance: float = 1e-3):
    """Returns a list of (loss name, GradCheckReport) covering the four task
    losses and the weighted combined loss on a small random model."""
    rng = generator(seed, "gradcheck")
    config = ModelConfig(n_labs=2, hidden=3, rnn_layers=1, head_layers=1, head_nodes=4)
    model = Model("DeepJointFeature", config, rng)
    batch = make_batch(_toy_patients(rng), model.spec)
    params = model.parameters()

    def losses():
        return forward_losses(model, batch, with_presence=True)

    cases = [
        ("longitudinal_nll", lambda: losses().long),
        ("missingness_nll", lambda: losses().miss),
        ("temporal_nll", lambda: losses().tpp),
        ("cox_partial_nll", lambda: losses().surv),
        ("combined_dwa_loss", lambda: (lambda f: combined_loss(
            f.surv, f.long, f.tpp, f.miss, (1 / 3, 1 / 3, 1 / 3), 0.5))(losses())),
    ]
    reports = []
    for name, fn in cases:
        reports.append((name, finite_difference_check(fn, params, step, tolerance)))
    return reports


def format_report(reports) -> str:
    lines = []
    for name, report in reports:
        for block in report.blocks:
            status = "ok" if block.passed else "FAIL"
            lines.append(f"{status:4s} {name:20s} {block.name:20s} "
                         f"rel_err={block.rel_error:.3e}")
        worst = report.max_rel_error
        overall = "PASS" if report.passed else "FAIL"
        lines.append(f"{overall} {name:20s} max_rel_err={worst:.3e} "
                     f"(tolerance {report.tolerance:g})")
    return "\n".join(lines)
