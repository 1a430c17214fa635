"""Command line interface: ``mllp <command> ...`` or ``python -m mllp``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .binarizer import (
    Discretizer,
    binarize,
    binarize_with_dictionary,
    fit_discretizer,
    load_csv,
    load_schema,
)
from .crs import CrsModel, fallback_count, predict, render_rules, rules_json
from .datasets import DATASETS, dataset_path
from .errors import ConfigError, DataError, MllpError
from .harness import DEFAULT_GRID, ExperimentConfig, macro_f1, run_experiment
from .simplify import simplify
from .trainer import MllpModel, TrainConfig, default_widths, extract_crs, init_model, predict_mllp, train

# flag name -> TrainConfig field
TRAIN_FLAGS = {
    "epochs": "epochs",
    "batch": "batch_size",
    "lr": "lr",
    "lr_decay": "lr_decay_factor",
    "lr_decay_every": "lr_decay_every",
    "weight_decay": "weight_decay",
    "threshold": "threshold",
    "optimizer": "optimizer",
}


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--label-col", help="label column (default: last column)")
    p.add_argument("--schema", help="JSON file {column: continuous|categorical}")


def _add_train(p):
    g = p.add_argument_group("training")
    g.add_argument("--layers", type=int, default=4, help="number of logical layers 2L (default 4)")
    g.add_argument("--hidden", type=int, help="width of every middle layer")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--lr-decay", type=float, help="multiplicative learning-rate decay factor")
    g.add_argument("--lr-decay-every", type=int, help="epochs between decays")
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--threshold", type=float, help="weight binarization threshold")
    g.add_argument("--optimizer", choices=["sgd", "adam"])
    g.add_argument("--seed", type=int, default=0)


def _overrides(args) -> dict:
    return {f: getattr(args, a) for a, f in TRAIN_FLAGS.items() if getattr(args, a, None) is not None}


def _schema(args):
    return load_schema(args.schema) if args.schema else None


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None


def _load_model(path):
    d = _read_json(path)
    kind = d.get("kind")
    if kind == "crs":
        return CrsModel.from_json(d)
    if kind == "mllp":
        return MllpModel.from_json(d)
    raise DataError(f"{path}: unknown model kind {kind!r}")


def _load_crs(path) -> CrsModel:
    model = _load_model(path)
    if isinstance(model, MllpModel):
        return extract_crs(model)
    return model


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _binarized(args, model):
    """Binarize ``--data`` with the model's own feature dictionary."""
    if model.dictionary is None:
        raise DataError("model carries no feature dictionary; cannot binarize raw data")
    data = load_csv(args.data, args.label_col, _schema(args))
    return binarize_with_dictionary(data, model.dictionary, model.label_order)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_discretize(args) -> int:
    data = load_csv(args.data, args.label_col, _schema(args))
    disc = fit_discretizer(data)
    disc.save(args.out)
    print(f"{disc.n_features} binary features from {len(disc.columns)} columns -> {args.out}")
    for col in disc.dropped:
        print(f"dropped column {col!r} (no informative split)")
    return 0


def cmd_train(args) -> int:
    data = load_csv(args.data, args.label_col, _schema(args))
    disc = Discretizer.load(args.discretizer) if args.discretizer else fit_discretizer(data)
    ds = binarize(data, disc)
    J, C = ds.features.shape[1], ds.labels.shape[1]
    config = TrainConfig(default_widths(J, C, args.layers, args.hidden), rb_rate=args.rb_rate,
                         seed=args.seed, **_overrides(args))
    rows = []

    def on_epoch(entry, model):
        if args.log_crs:
            entry.crs_f1 = macro_f1(predict(extract_crs(model), ds.features), ds.y, C)
        rows.append(entry)

    model, _ = train(init_model(config, ds.dictionary, ds.label_order), ds, config, on_epoch=on_epoch)
    model.save(args.out)
    log_path = Path(args.log) if args.log else Path(args.out).with_suffix(".log.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "lr", "loss", "crs_f1"])
        for e in rows:
            w.writerow([e.epoch, f"{e.lr:.6g}", f"{e.loss:.8f}", "" if e.crs_f1 is None else f"{e.crs_f1:.6f}"])
    f1 = macro_f1(predict_mllp(model, ds.features), ds.y, C)
    print(f"trained {config.layer_widths} for {config.epochs} epochs; training MLLP macro-F1 {100 * f1:.2f}")
    print(f"model -> {args.out}, log -> {log_path}")
    return 0


def cmd_extract(args) -> int:
    model = _load_model(args.model)
    if not isinstance(model, MllpModel):
        raise DataError(f"{args.model} is already a CRS")
    crs = extract_crs(model, args.threshold)
    crs.save(args.out)
    print(f"CRS with {sum(int(W.sum()) for W in crs.layers)} edges -> {args.out}")
    return 0


def cmd_simplify(args) -> int:
    crs = _load_crs(args.model)
    train_x = _binarized(args, crs).features if args.data else None
    simple, report = simplify(crs, train_x, structural_only=args.structural_only)
    simple.save(args.out)
    sys.stdout.write(report.format())
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["metric", "value"])
            w.writerows(report.csv_rows())
    if args.report:
        _write_json(args.report, report.to_json())
    return 0


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    if model.dictionary is None:
        raise DataError("model carries no feature dictionary; cannot binarize raw data")
    data = load_csv(args.data, args.label_col, _schema(args), labelled=False)
    X = binarize_with_dictionary(data, model.dictionary).features
    pred = predict(model, X) if isinstance(model, CrsModel) else predict_mllp(model, X)
    names = model.label_order
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["row", "prediction"])
        for r, c in enumerate(pred):
            w.writerow([r, names[c] if names else int(c)])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    ds = _binarized(args, model)
    C = len(model.label_order)
    if isinstance(model, CrsModel):
        pred = predict(model, ds.features)
        result = {"kind": "crs", "macro_f1": macro_f1(pred, ds.y, C), "fallback": fallback_count(model, ds.features)}
    else:
        pred = predict_mllp(model, ds.features)
        result = {"kind": "mllp", "macro_f1": macro_f1(pred, ds.y, C)}
    result["n"] = ds.n
    result["accuracy"] = float(np.mean(pred == ds.y))
    print(f"macro-F1 {100 * result['macro_f1']:.2f}  accuracy {100 * result['accuracy']:.2f}  n {ds.n}")
    if "fallback" in result:
        print(f"fallback predictions {result['fallback']}")
    if args.json:
        _write_json(args.json, result)
    return 0


def cmd_export_rules(args) -> int:
    crs = _load_crs(args.model)
    layer = index = None
    if args.node:
        try:
            layer, index = (int(v) for v in args.node.split(":"))
        except ValueError:
            raise ConfigError(f"--node expects LAYER:INDEX, got {args.node!r}") from None
    try:
        text = render_rules(crs, layer, index)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.json:
        _write_json(args.json, rules_json(crs))
    return 0


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--rb-grid expects comma separated numbers, got {text!r}") from None
    return grid


def cmd_experiment(args) -> int:
    settings: dict = {}
    data, label_col, schema = args.data, args.label_col, args.schema
    if args.dataset:
        spec = DATASETS.get(args.dataset)
        if spec is None:
            raise ConfigError(f"unknown dataset {args.dataset!r}; known: {sorted(DATASETS)}")
        data = data or str(dataset_path(args.dataset))
        label_col = label_col or spec.label_col
        schema = schema or dict(spec.schema)
        settings = dict(spec.desk)
    if not data:
        raise ConfigError("--data or --dataset is required")
    grid = _parse_grid(args.rb_grid) if args.rb_grid else tuple(settings.pop("rb_grid", DEFAULT_GRID))
    settings.pop("rb_grid", None)
    hidden = args.hidden if args.hidden is not None else settings.pop("hidden", None)
    settings.pop("hidden", None)
    settings.update(_overrides(args))
    cfg = ExperimentConfig(
        data=data,
        label_col=label_col,
        schema=schema,
        folds=args.folds,
        val_fraction=args.val_fraction,
        rb_grid=grid,
        n_logical=args.layers,
        hidden=hidden,
        train=settings,
        global_discretize=args.global_discretize,
        structural_only=args.structural_only,
        ablation=args.ablation,
        seed=args.seed,
        out=args.out,
    )
    report = run_experiment(cfg, progress=lambda msg: print(msg, file=sys.stderr))
    sys.stdout.write(report.format())
    print(f"reports -> {args.out}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mllp", description="Concept rule sets learned by a logical perceptron")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="fit the discretizer and save it")
    _add_data(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("train", help="train an MLLP")
    _add_data(p)
    _add_train(p)
    p.add_argument("--discretizer", help="saved discretizer (default: fit on --data)")
    p.add_argument("--rb-rate", type=float, default=0.0, help="random binarization rate P")
    p.add_argument("--log", help="training log CSV (default: next to --out)")
    p.add_argument("--log-crs", action="store_true", help="log training macro-F1 of the extracted CRS per epoch")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="binarize a trained MLLP into a CRS")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("simplify", help="remove dead nodes and redundant edges")
    p.add_argument("--model", required=True)
    _add_data(p, required=False)
    p.add_argument("--structural-only", action="store_true", help="skip the data-based dead-node check")
    p.add_argument("--csv", help="write the simplification report as CSV")
    p.add_argument("--report", help="write the simplification report as JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("predict", help="predict classes for a CSV")
    p.add_argument("--model", required=True)
    _add_data(p)
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="macro-F1 of a model on labelled data")
    p.add_argument("--model", required=True)
    _add_data(p)
    p.add_argument("--json", help="write the metrics as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-rules", help="print the rules of a CRS")
    p.add_argument("--model", required=True)
    p.add_argument("--node", help="LAYER:INDEX of a single node (default: all outputs)")
    p.add_argument("--json", help="also write the rule trees as JSON")
    p.add_argument("--out", help="text output (default: stdout)")
    p.set_defaults(func=cmd_export_rules)

    p = sub.add_parser("experiment", help="cross-validated run with P grid search")
    _add_data(p, required=False)
    p.add_argument("--dataset", help="manifest name; supplies path, schema and desk-scale settings")
    _add_train(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--rb-grid", help="comma separated P values (default 0,0.5,0.7,0.8,0.9,0.95)")
    p.add_argument("--global-discretize", action="store_true", help="fit the discretizer on the whole dataset")
    p.add_argument("--structural-only", action="store_true")
    p.add_argument("--ablation", action="store_true", help="also train P=0 models per fold")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except MllpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
