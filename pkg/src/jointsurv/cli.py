"""Experiment command line: synth, train, evaluate, robustness, gradcheck.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error. The JOINTSURV_OUT environment variable sets the root for relative
output directories.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .autodiff import AutodiffError
from .config import (ExperimentConfig, RunManifest, load_experiment_config,
                     load_regime_config)
from .data import DataError, Dataset, dataset_fingerprint, load_dataset, \
    split_random, split_weekday_weekend, write_dataset
from .evaluation import MetricUndefinedError, evaluate_predictions
from .gradcheck import format_report, run_gradcheck
from .model import ConfigError, ModelConfig, variant_spec
from .robustness import delta_table_rows, robustness_harness
from .seeding import derive_seed
from .synthgen import generate, shift_regime
from .training import load_checkpoint, predict, save_checkpoint, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _out_dir(arg_out, default) -> Path:
    out = Path(arg_out) if arg_out else Path(default)
    root = os.environ.get("JOINTSURV_OUT")
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_table_rows(reports):
    if not reports:
        return []
    horizons = [r.horizon for r in reports[0].rows]
    header = ["label"]
    for metric in ("cindex", "brier"):
        header += [f"{metric}_{tau:g}d" for tau in horizons]
    rows = [header]
    for rep in reports:
        row = [rep.label]
        for attr in ("cindex", "brier"):
            for hrow in rep.rows:
                mean = getattr(hrow, f"{attr}_mean")
                lo = getattr(hrow, f"{attr}_lo")
                hi = getattr(hrow, f"{attr}_hi")
                row.append(f"{mean:.3f} ({(hi - lo) / 2:.3f})")
        rows.append(row)
    return rows


def _load_source(cfg: ExperimentConfig):
    """Returns (dataset, fingerprint): file sources hash the file bytes,
    generator sources hash the resolved regime so reruns are traceable."""
    if cfg.longitudinal_path and cfg.outcome_path:
        fingerprint = dataset_fingerprint(cfg.longitudinal_path, cfg.outcome_path)
        return load_dataset(cfg.longitudinal_path, cfg.outcome_path), fingerprint
    import hashlib

    regime = cfg.regime
    regime.seed = derive_seed(cfg.seed, "synth-data")
    spec = json.dumps({"regime": vars(regime), "n": cfg.n_patients},
                      sort_keys=True, default=str)
    fingerprint = "regime:" + hashlib.sha256(spec.encode()).hexdigest()
    return generate(cfg.n_patients, regime), fingerprint


def _plot_report(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    horizons = [r.horizon for r in report.rows]
    means = [r.cindex_mean for r in report.rows]
    lo = [r.cindex_mean - r.cindex_lo for r in report.rows]
    hi = [r.cindex_hi - r.cindex_mean for r in report.rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(horizons, means, yerr=[lo, hi], marker="o", capsize=3)
    ax.set_xlabel("horizon (days after observation window)")
    ax.set_ylabel("time-dependent C-index")
    ax.set_title(report.label)
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    regime = load_regime_config(args.regime_config)
    if args.seed is not None:
        regime.seed = args.seed
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    out = _out_dir(args.out, "synth")
    dataset = generate(args.n, regime)
    long_path = out / "longitudinal.csv"
    outcome_path = out / "outcome.csv"
    write_dataset(dataset, long_path, outcome_path)
    manifest = RunManifest.create(
        config={"regime": vars(regime), "n_patients": args.n},
        fingerprint=dataset_fingerprint(long_path, outcome_path))
    manifest.write(out / "manifest.json")
    print(f"wrote {dataset.n} patients to {out}")
    return EXIT_OK


def _train_and_report(cfg: ExperimentConfig, out: Path, evaluate_only: bool) -> int:
    dataset, fingerprint = _load_source(cfg)
    checkpoint_path = out / "checkpoint.npz"
    test_ds = None
    if cfg.train_fraction < 1.0:
        train_ds, test_ds = split_random(dataset, cfg.train_fraction,
                                         derive_seed(cfg.seed, "train-test"))
        write_dataset(test_ds, out / "test_longitudinal.csv", out / "test_outcome.csv")
    else:
        train_ds = dataset

    if evaluate_only:
        if not checkpoint_path.exists():
            raise ConfigError(f"--evaluate-only needs an existing checkpoint at "
                              f"{checkpoint_path}")
        trained = load_checkpoint(checkpoint_path)
        print(f"loaded checkpoint {checkpoint_path}, skipping training")
    else:
        trained = train(train_ds, cfg.train, cfg.model)
        save_checkpoint(trained, checkpoint_path)
        _write_csv(out / "history.csv", trained.history.to_rows())
        manifest = RunManifest.create(config=cfg.resolved(),
                                      fingerprint=fingerprint,
                                      stage_epochs=trained.stage_epochs)
        manifest.write(out / "manifest.json")
    if test_ds is not None and test_ds.n:
        preds = predict(trained, test_ds, cfg.horizons)
        report = evaluate_predictions(preds, label=cfg.variant,
                                      n_boot=cfg.n_bootstrap,
                                      seed=derive_seed(cfg.seed, "bootstrap"))
        _write_json(out / "report.json", report.to_dict())
        _write_csv(out / "report.csv", _report_table_rows([report]))
        print(f"evaluation report written to {out / 'report.json'}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.variant is not None:
        cfg.variant = variant_spec(args.variant).name
    cfg.validate()
    out = _out_dir(args.out, cfg.out_dir)
    return _train_and_report(cfg, out, args.evaluate_only)


def cmd_evaluate(args) -> int:
    trained = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data[0], args.data[1])
    horizons = tuple(float(h) for h in args.horizons.split(","))
    out = _out_dir(args.out, "evaluation")
    seed = args.seed if args.seed is not None else 0
    preds = predict(trained, dataset, horizons)
    report = evaluate_predictions(preds, label=trained.config.variant,
                                  n_boot=args.bootstrap,
                                  seed=derive_seed(seed, "bootstrap"))
    _write_json(out / "report.json", report.to_dict())
    _write_csv(out / "report.csv", _report_table_rows([report]))
    if args.plot:
        _plot_report(report, out / "plot.svg")
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def _robustness_task(payload):
    (variant, group_a, group_b, train_cfg, model_cfg, horizons, n_boot,
     train_fraction, oversample_flag, seed) = payload
    return robustness_harness(group_a, group_b, variant, train_cfg, model_cfg,
                              horizons=horizons, n_boot=n_boot,
                              train_fraction=train_fraction,
                              oversample_to_match=oversample_flag, seed=seed)


def cmd_robustness(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    rob = raw.pop("robustness", None)
    if not isinstance(rob, dict):
        raise ConfigError("robustness config needs a 'robustness' section")
    variants = [variant_spec(v).name for v in rob.get("variants", [])]
    if not variants:
        raise ConfigError("robustness section needs a non-empty variants list")
    base_cfg = _parse_robustness_base(args.config)
    if args.seed is not None:
        base_cfg.seed = args.seed
    out = _out_dir(args.out, base_cfg.out_dir)
    group_a, group_b = _robustness_groups(base_cfg, rob)
    payloads = []
    for variant in variants:
        payloads.append((variant, group_a, group_b, base_cfg.train, base_cfg.model,
                         base_cfg.horizons, base_cfg.n_bootstrap,
                         base_cfg.train_fraction, bool(rob.get("oversample", True)),
                         derive_seed(base_cfg.seed, f"robust-{variant}")))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_robustness_task, payloads))
    else:
        results = [_robustness_task(p) for p in payloads]
    payload = {
        "results": [
            {"variant": r.variant,
             "in_domain": r.in_domain.to_dict(),
             "transfer": r.transfer.to_dict(),
             "deltas": {f"{tau:g}": {"c_index": d[0], "brier": d[1]}
                        for tau, d in sorted(r.deltas.items())}}
            for r in results
        ]
    }
    _write_json(out / "robustness_report.json", payload)
    _write_csv(out / "delta_table.csv", delta_table_rows(results))
    reports = [r.in_domain for r in results] + [r.transfer for r in results]
    _write_csv(out / "paired_reports.csv", _report_table_rows(reports))
    print(f"robustness outputs in {out}")
    return EXIT_OK


def _parse_robustness_base(path) -> ExperimentConfig:
    """The robustness config reuses the experiment schema plus a
    'robustness' section, which is stripped before normal parsing."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    raw.pop("robustness", None)
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".yaml", delete=False) as tmp:
        yaml.safe_dump(raw, tmp)
        tmp_path = tmp.name
    try:
        return load_experiment_config(tmp_path)
    finally:
        os.unlink(tmp_path)


def _robustness_groups(cfg: ExperimentConfig, rob: dict):
    """Group B is the in-domain population, group A the transfer source."""
    mode = rob.get("group_mode", "regimes")
    if mode == "weekday_weekend":
        if not (cfg.longitudinal_path and cfg.outcome_path):
            raise ConfigError("weekday_weekend grouping needs data files")
        dataset = load_dataset(cfg.longitudinal_path, cfg.outcome_path)
        weekday, weekend = split_weekday_weekend(dataset)
        if weekday.n == 0 or weekend.n == 0:
            raise DataError("weekday/weekend grouping produced an empty group")
        return weekend, weekday
    if mode != "regimes":
        raise ConfigError(f"unknown group_mode {mode!r}")
    if cfg.regime is None:
        raise ConfigError("regimes grouping needs a base regime")
    n = int(rob.get("n_patients", cfg.n_patients))
    if n < 2:
        raise ConfigError("robustness generation needs n_patients >= 2")
    overrides = dict(rob.get("shift", {}) or {})
    base = shift_regime(cfg.regime, {"seed": derive_seed(cfg.seed, "group-b")})
    shifted = shift_regime(cfg.regime, {**overrides,
                                        "seed": derive_seed(cfg.seed, "group-a")})
    return generate(n, shifted), generate(n, base)


def cmd_gradcheck(args) -> int:
    reports = run_gradcheck(seed=args.seed if args.seed is not None else 0)
    print(format_report(reports))
    failed = [name for name, rep in reports if not rep.passed]
    if failed:
        print(f"gradient check FAILED for: {', '.join(failed)}")
        return EXIT_NUMERIC
    print("all gradient checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointsurv",
        description="observation-process-aware survival experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("regime_config", help="YAML regime config")
    p.add_argument("--n", type=int, required=True, help="number of patients")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one variant end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--evaluate-only", action="store_true",
                   help="skip optimisation; reuse the existing checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on test data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", nargs=2, required=True,
                   metavar=("LONGITUDINAL", "OUTCOME"))
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bootstrap", type=int, default=100)
    p.add_argument("--horizons", default="1,7,14")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", help="paired transfer experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except yaml.YAMLError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AutodiffError, MetricUndefinedError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
