"""Command line interface: train, eval, analyze, synth.

Option precedence is flags > config file > built-in defaults. Every
stochastic component derives its seed from the single root --seed, so a
command repeated with the same inputs writes identical outputs (metrics.json
differs only in its generated_at field). Outputs are written only after all
computation succeeds; failures exit nonzero without partial output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import (Dataset, SynthSpec, inject_contamination, load_dataset,
                   regime_spec, sample_split, save_dataset, synth_dataset)
from .evaluation import anomaly_scores, auprc, auroc
from .exceptions import InputError, RhoError
from .graph import laplacian_operator, node_homophily
from .model import (ModelConfig, forward, load_checkpoint, save_checkpoint)
from .seeding import derive_seed
from .spectral import filter_response_curve
from .training import TrainConfig, fit

CONFIG_DEFAULTS = {
    "hidden_dim": 64,
    "layers": 2,
    "temperature": 0.5,
    "alpha": 1.0,
    "weight_penalty": 5e-5,
    "batch_size": 512,
    "activation": "relu",
    "cwr_formula": "per-channel",
    "include_positive_in_denominator": False,
    "learning_rate": 5e-3,
    "epochs": 200,
    "freeze_filters": False,
    "labeled_percent": 15.0,
    "contamination": 0.0,
    "seed": 0,
}

# maps CLI flag destinations onto config keys
_FLAG_KEYS = ("hidden_dim", "layers", "temperature", "alpha", "batch_size",
              "learning_rate", "epochs", "labeled_percent", "contamination",
              "seed", "freeze_filters")


def _resolve_config(args) -> dict:
    cfg = dict(CONFIG_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _model_config(cfg: dict, input_dim: int) -> ModelConfig:
    return ModelConfig(
        input_dim=input_dim,
        hidden_dim=int(cfg["hidden_dim"]),
        layers=int(cfg["layers"]),
        temperature=float(cfg["temperature"]),
        alpha=float(cfg["alpha"]),
        weight_penalty=float(cfg["weight_penalty"]),
        batch_size=int(cfg["batch_size"]),
        activation=str(cfg["activation"]),
        cwr_formula=str(cfg["cwr_formula"]),
        include_positive_in_denominator=bool(cfg["include_positive_in_denominator"]),
        seed=int(cfg["seed"]),
    )


def _resolve_split(dataset: Dataset, cfg: dict) -> Dataset:
    if dataset.split is not None:
        return dataset
    split = sample_split(dataset.labels, float(cfg["labeled_percent"]),
                         derive_seed(int(cfg["seed"]), "split"))
    return replace(dataset, split=split)


def _write_metrics(path: Path, metrics: dict, cfg: dict) -> None:
    payload = dict(metrics)
    payload["config"] = cfg
    payload["generated_at"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _score_and_metrics(dataset: Dataset, mcfg: ModelConfig, params):
    op = laplacian_operator(dataset.graph)
    state = forward(op, params, dataset.features, mcfg)
    table = anomaly_scores(state, dataset.split.test, dataset.labels)
    metrics = {
        "auroc": auroc(table.scores, table.labels),
        "auprc": auprc(table.scores, table.labels),
        "test_size": int(table.node_ids.size),
        "labeled_size": int(dataset.split.labeled.size),
        "seed": mcfg.seed,
    }
    return table, metrics


def _write_split(path: Path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"labeled": dataset.split.labeled.tolist()}, fh)


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    dataset = _resolve_split(load_dataset(args.data), cfg)
    if float(cfg["contamination"]) > 0:
        dataset = inject_contamination(dataset, float(cfg["contamination"]),
                                       derive_seed(int(cfg["seed"]), "contamination"))
    mcfg = _model_config(cfg, dataset.feature_dim)
    tcfg = TrainConfig(learning_rate=float(cfg["learning_rate"]),
                       epochs=int(cfg["epochs"]),
                       freeze_filters=bool(cfg["freeze_filters"]))
    params, log = fit(dataset, mcfg, tcfg)
    table, metrics = _score_and_metrics(dataset, mcfg, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.json", mcfg, params)
    log.to_csv(out / "loss_log.csv")
    table.to_csv(out / "scores.csv")
    _write_metrics(out / "metrics.json", metrics, cfg)
    _write_split(out / "split.json", dataset)
    print(f"trained {tcfg.epochs} epochs: auroc={metrics['auroc']:.4f} "
          f"auprc={metrics['auprc']:.4f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    mcfg, params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if dataset.feature_dim != mcfg.input_dim:
        raise InputError(f"checkpoint expects {mcfg.input_dim} features, "
                         f"dataset has {dataset.feature_dim}")
    dataset = _resolve_split(dataset, cfg)
    table, metrics = _score_and_metrics(dataset, mcfg, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "scores.csv")
    _write_metrics(out / "metrics.json", metrics, cfg)
    print(f"evaluated {args.checkpoint}: auroc={metrics['auroc']:.4f} "
          f"auprc={metrics['auprc']:.4f} -> {out}")
    return 0


def _analyze_homophily(args, out: Path) -> None:
    if not args.data:
        raise InputError("analyze --mode homophily requires --data")
    dataset = load_dataset(args.data)
    report = node_homophily(dataset.graph, dataset.labels)
    bins = args.bins if args.bins is not None else 20
    if bins < 1:
        raise InputError(f"--bins must be positive, got {bins}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    node_labels = dataset.labels[report.node_ids]
    rows = []
    for label in (0, 1):
        counts, _ = np.histogram(report.values[node_labels == label],
                                 bins=bins, range=(0.0, 1.0))
        for i, count in enumerate(counts):
            rows.append(f"{edges[i]:.17g},{edges[i + 1]:.17g},{count},{label}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "homophily_hist.csv", "w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count,label\n")
        fh.write("\n".join(rows) + "\n")
    print(f"wrote homophily histogram ({bins} bins, "
          f"{report.excluded.size} isolated nodes excluded) -> {out}")


def _analyze_filter_response(args, out: Path) -> None:
    if not args.checkpoint:
        raise InputError("analyze --mode filter-response requires --checkpoint")
    mcfg, params = load_checkpoint(args.checkpoint)
    grid_size = args.grid_size if args.grid_size is not None else 100
    if grid_size < 2:
        raise InputError(f"--grid-size must be at least 2, got {grid_size}")
    lam = np.linspace(0.0, 2.0, grid_size, endpoint=False)
    rows = []
    ccr = filter_response_curve(params.k_ccr, lam)
    for x, r in zip(lam, ccr):
        rows.append(f"{x:.17g},{r:.17g},ccr")
    for j in range(mcfg.hidden_dim):
        channel = filter_response_curve(params.k_cwr[:, j], lam)
        for x, r in zip(lam, channel):
            rows.append(f"{x:.17g},{r:.17g},cwr_{j:03d}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "filter_response.csv", "w", encoding="utf-8") as fh:
        fh.write("lambda,response,filter\n")
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {len(rows)} response samples "
          f"({mcfg.hidden_dim + 1} filters x {grid_size} points) -> {out}")


def cmd_analyze(args) -> int:
    out = Path(args.out)
    if args.mode == "homophily":
        _analyze_homophily(args, out)
    else:
        _analyze_filter_response(args, out)
    return 0


def cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    preset = payload.pop("preset", None)
    try:
        if preset is not None:
            if "n" not in payload:
                raise InputError("synth spec with a preset still needs n")
            n = payload.pop("n")
            seed = payload.pop("seed", 0)
            spec = regime_spec(preset, n=n, seed=seed, **payload)
        else:
            spec = SynthSpec(**payload)
    except TypeError as exc:
        raise InputError(f"bad synth spec: {exc}") from None
    dataset, report = synth_dataset(spec, return_report=True)

    out = Path(args.out)
    save_dataset(dataset, out)
    with open(out / "synth_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"generated n={spec.n} dataset "
          f"(anomalies={report['anomaly_count']}, "
          f"low fraction={report['group_fractions']['low']:.2f}) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rho",
        description="Semi-supervised graph anomaly detection with adaptive "
                    "spectral filters.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=True, config=True):
        if data:
            p.add_argument("--data", help="dataset directory")
        if config:
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="root seed")

    train = sub.add_parser("train", help="train a detector and score the test set")
    add_common(train)
    train.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    train.add_argument("--layers", type=int)
    train.add_argument("--temperature", type=float)
    train.add_argument("--alpha", type=float)
    train.add_argument("--batch-size", type=int, dest="batch_size")
    train.add_argument("--learning-rate", type=float, dest="learning_rate")
    train.add_argument("--epochs", type=int)
    train.add_argument("--labeled-percent", type=float, dest="labeled_percent")
    train.add_argument("--contamination", type=float)
    train.add_argument("--freeze-filters", action="store_const", const=True,
                       dest="freeze_filters",
                       help="pin all filter coefficients at 1.0 (fixed-filter baseline)")
    train.set_defaults(func=cmd_train)

    evalp = sub.add_parser("eval", help="score an existing checkpoint")
    add_common(evalp)
    evalp.add_argument("--checkpoint", required=True)
    evalp.add_argument("--labeled-percent", type=float, dest="labeled_percent")
    evalp.set_defaults(func=cmd_eval)

    analyze = sub.add_parser("analyze", help="graph homophily or learned filter curves")
    analyze.add_argument("--mode", required=True,
                         choices=("homophily", "filter-response"))
    add_common(analyze, config=False)
    analyze.add_argument("--checkpoint")
    analyze.add_argument("--bins", type=int, help="histogram bins (homophily mode)")
    analyze.add_argument("--grid-size", type=int, dest="grid_size",
                         help="lambda grid points in [0, 2) (filter-response mode)")
    analyze.set_defaults(func=cmd_analyze)

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--spec", required=True, help="SynthSpec JSON file")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # train requires --data even though analyze does not
    if args.command in ("train", "eval") and not args.data:
        parser.error(f"{args.command} requires --data")
    try:
        return args.func(args)
    except RhoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
