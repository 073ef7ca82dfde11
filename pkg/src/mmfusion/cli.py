"""Command-line surface: dataset generation, training, evaluation,
attribution, grid sweeps, dataset validation and checkpoint inspection.

Exit codes: 0 success, 1 configuration/format/I-O failure, 2 violated data
or model invariant.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys

from .attribution import METHODS, region_attribution
from .backend import backend_name
from .data import SyntheticConfig, generate_synthetic, load_dataset, save_dataset
from .errors import ConfigError, FormatError, InvariantError
from .evaluation import evaluate, export_confusion_csv, export_report_json
from .models import build_model, load_checkpoint, save_checkpoint
from .training import RunConfig, train_model

log = logging.getLogger(__name__)

GRID_SHORTCUTS = {"lr": "schedule.peak_lr", "warmup": "schedule.warmup_steps"}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(raw: dict, path: str, value) -> None:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {path!r}: {key!r} is not an object")
    node[keys[-1]] = value


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        path, text = item.split("=", 1)
        _set_path(raw, path.strip(), _parse_value(text.strip()))
    return raw


def _load_config(path: str, overrides: list[str]) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(_apply_overrides(raw, overrides))


def _parse_grid(spec: str) -> tuple[str, list]:
    if "=" not in spec:
        raise ConfigError(f"grid spec {spec!r} must look like name=values")
    name, text = spec.split("=", 1)
    name = name.strip()
    path = GRID_SHORTCUTS.get(name, name)
    text = text.strip()
    if ".." in text:
        head, _, step_text = text.partition(":")
        if not step_text:
            raise ConfigError(f"grid range {text!r} needs a :step suffix")
        start_text, _, stop_text = head.partition("..")
        start, stop, step = (_parse_value(v) for v in (start_text, stop_text, step_text))
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid range {text!r}")
        values = []
        i = 0
        while True:
            value = start + i * step
            if value > stop * (1 + 1e-12) + 1e-300:
                break
            values.append(value)
            i += 1
        if all(isinstance(v, int) for v in (start, stop, step)):
            values = [int(round(v)) for v in values]
    else:
        values = [_parse_value(v) for v in text.split(",") if v != ""]
    if not values:
        raise ConfigError(f"grid spec {spec!r} produced no values")
    return path, values


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    config = SyntheticConfig(
        num_classes=args.classes,
        num_regions=args.regions,
        region_feature_dim=args.region_dim,
        max_text_len=args.max_text_len,
        visual_states=args.visual_states,
        val_fraction=args.val_fraction,
        test_fraction=args.test_fraction,
    )
    dataset = generate_synthetic(args.seed, args.samples, config)
    save_dataset(dataset, args.out)
    counts = {name: len(dataset.split(name)) for name in ("train", "val", "test")}
    print(f"wrote {len(dataset.samples)} samples to {args.out}.* (splits: {counts})")
    return 0


def cmd_train(args) -> int:
    run = _load_config(args.config, args.set)
    dataset = load_dataset(args.data)
    if run.model.vocab_size < len(dataset.vocab):
        raise ConfigError(
            f"model vocab_size {run.model.vocab_size} is smaller than "
            f"dataset vocabulary ({len(dataset.vocab)} tokens)"
        )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(run.to_dict(), fh, indent=2)
        fh.write("\n")
    model = build_model(run.model, run.seed)
    history = train_model(model, dataset, run, os.path.join(args.out, "metrics.jsonl"))
    checkpoint = os.path.join(args.out, "checkpoint.mmfl")
    save_checkpoint(model, checkpoint)
    final = [row for row in history if row["split"] == "train"][-1]
    print(
        f"trained {run.model.family} for {run.schedule.total_steps} steps "
        f"(train acc {final['accuracy']:.4f}, macro-F1 {final['macro_f1']:.4f}); "
        f"checkpoint at {checkpoint}"
    )
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    samples = dataset.split(args.split)
    report = evaluate(model, samples, dataset.class_names, workers=args.workers)
    export_report_json(report, f"{args.report_out}.json")
    export_confusion_csv(report, f"{args.report_out}.csv")
    print(
        f"{args.split}: n={report.n_samples} accuracy={report.accuracy:.4f} "
        f"macro_f1={report.macro_f1:.4f} -> {args.report_out}.json/.csv"
    )
    return 0


def cmd_attrib(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    sample = dataset.by_id(args.sample_id)
    if args.cls.isdigit():
        target = int(args.cls)
    else:
        if args.cls not in dataset.class_names:
            raise ConfigError(f"unknown class {args.cls!r}")
        target = dataset.class_names.index(args.cls)
    report = region_attribution(model, sample, target, method=args.method)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    top = ", ".join(f"#{e['index']}({e['normalized']:.2f})" for e in report.top3)
    print(f"attribution for {args.sample_id} class {target}: top regions {top} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            base_raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
    _apply_overrides(base_raw, args.set)
    grids = [_parse_grid(spec) for spec in args.grid]
    if not grids:
        raise ConfigError("sweep needs at least one --grid")
    dataset = load_dataset(args.data)
    if not dataset.split("val"):
        raise ConfigError("sweep selection needs a non-empty val split")
    os.makedirs(args.out, exist_ok=True)

    cells = []
    best = None
    best_model = None
    for combo in itertools.product(*(values for _, values in grids)):
        raw = json.loads(json.dumps(base_raw))
        assignment = {}
        for (path, _), value in zip(grids, combo):
            _set_path(raw, path, value)
            assignment[path] = value
        run = RunConfig.from_dict(raw)
        model = build_model(run.model, run.seed)
        history = train_model(model, dataset, run)
        val_rows = [row for row in history if row["split"] == "val"]
        final = val_rows[-1]
        cell = {
            "assignment": assignment,
            "val_accuracy": final["accuracy"],
            "val_macro_f1": final["macro_f1"],
            "val_loss": final["loss"],
        }
        cells.append(cell)
        log.info("sweep cell %s: val macro-F1 %.4f", assignment, final["macro_f1"])
        if best is None or cell["val_macro_f1"] > best["val_macro_f1"]:
            best = cell
            best_model = model

    checkpoint = os.path.join(args.out, "best_checkpoint.mmfl")
    save_checkpoint(best_model, checkpoint)
    summary = {"cells": cells, "best": best, "selection_metric": "val_macro_f1"}
    with open(os.path.join(args.out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(
        f"swept {len(cells)} cells; best {best['assignment']} "
        f"(val macro-F1 {best['val_macro_f1']:.4f}); checkpoint at {checkpoint}"
    )
    return 0


def cmd_validate(args) -> int:
    dataset = load_dataset(args.data)
    counts = {name: len(dataset.split(name)) for name in ("train", "val", "test")}
    print(
        f"ok: {len(dataset.samples)} samples, {dataset.num_classes} classes, "
        f"k={dataset.num_regions}, dim={dataset.region_feature_dim}, splits={counts}"
    )
    return 0


def cmd_inspect(args) -> int:
    model = load_checkpoint(args.checkpoint)
    print(json.dumps({"family": model.config.family, "seed": model.seed,
                      "backend": backend_name()}, indent=2))
    total = 0
    for name, p in model.parameters().items():
        print(f"  {name:40s} {str(p.shape):18s} {p.size}")
        total += p.size
    print(f"total parameters: {total}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmfusion",
        description="Multimodal emotion classifiers: generate data, train, "
        "evaluate, attribute, sweep.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--seed", type=int, required=True, help="root seed for the generator")
    p.add_argument("--samples", type=int, required=True, help="number of samples")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--classes", type=int, default=9, help="number of emotion classes")
    p.add_argument("--regions", type=int, default=4, help="regions per image")
    p.add_argument("--region-dim", type=int, default=16, help="region feature dimension")
    p.add_argument("--max-text-len", type=int, default=12, help="longest caption in tokens")
    p.add_argument("--visual-states", type=int, default=2, help="distinct visual cues")
    p.add_argument("--val-fraction", type=float, default=0.1, help="validation share")
    p.add_argument("--test-fraction", type=float, default=0.1, help="test share")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("--config", required=True, help="run config JSON file")
    p.add_argument("--data", required=True, help="dataset path prefix")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                   help="override a config value (e.g. seed=1, schedule.peak_lr=1e-3)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--data", required=True, help="dataset path prefix")
    p.add_argument("--split", default="test", choices=("train", "val", "test"),
                   help="which split to score")
    p.add_argument("--report-out", required=True, help="report path prefix (.json/.csv)")
    p.add_argument("--workers", type=int, default=1, help="evaluation shards")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attrib", help="gradient attribution over image regions")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--data", required=True, help="dataset path prefix")
    p.add_argument("--sample-id", required=True, help="sample to explain")
    p.add_argument("--class", dest="cls", required=True,
                   help="target class index or name")
    p.add_argument("--method", default="grad_l2", choices=METHODS,
                   help="importance reduction")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_attrib)

    p = sub.add_parser("sweep", help="grid search selected by validation macro-F1")
    p.add_argument("--config", required=True, help="base run config JSON file")
    p.add_argument("--data", required=True, help="dataset path prefix")
    p.add_argument("--grid", action="append", default=[], metavar="NAME=VALUES",
                   help="grid axis: lr=1e-5..6e-5:1e-5 or warmup=1000,5000,10000")
    p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                   help="fixed config override applied to every cell")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="load a dataset and check every invariant")
    p.add_argument("--data", required=True, help="dataset path prefix")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("inspect", help="print checkpoint config and parameter shapes")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
