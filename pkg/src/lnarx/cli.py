"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
error, 3 numerical failure.  ``LNARX_LOG_LEVEL`` (DEBUG, INFO, WARNING,
...) sets log verbosity; logs go to stderr, results to files and stdout.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import forest_predict, grid_search, knn_fit, knn_predict
from .config import RunConfig, load_config
from .dataset import (
    CsvSchema,
    Standardizer,
    TimeSeriesDataset,
    load_channels,
    load_csv,
    stratified_folds,
    train_validation_split,
    write_csv,
)
from .errors import ConfigError, DataError, LnarxError, NumericalError, SchemaError
from .metrics import evaluate
from .modelfile import config_hash, load_model, read_json, save_model, write_json
from .multiclass import fit
from .railway import CLASS_NAMES, label_criticality_array, simulate
from .reports import evaluation_report, model_entry, render, train_report

log = logging.getLogger("lnarx")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _configure_logging():
    level = os.environ.get("LNARX_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    logging.captureWarnings(True)


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "data", None):
        cfg.data.path = args.data
    if getattr(args, "seed", None) is not None:
        cfg.split.seed = args.seed
        cfg.baselines.seed = args.seed
        cfg.simulate["seed"] = args.seed
    for name in ("k_max", "mode", "degree"):
        if getattr(args, name, None) is not None:
            setattr(cfg.model, name, getattr(args, name))
    return cfg.validate()


def _load_data(cfg: RunConfig) -> TimeSeriesDataset:
    if not cfg.data.path:
        raise ConfigError("no dataset given (set data.path in the config or pass --data)")
    if not Path(cfg.data.path).exists():
        raise DataError(f"dataset not found: {cfg.data.path}")
    ds = load_csv(cfg.data.path, cfg.data.schema())
    log.info("loaded %s: %d rows, %d channels, classes %s", cfg.data.path, ds.sample_count,
             ds.n_channels, ds.class_names)
    return ds


def _provenance(cfg: RunConfig) -> dict:
    return {
        "config_hash": config_hash(cfg.hashable()),
        "seed": cfg.split.seed,
        "data_sha256": _file_sha256(cfg.data.path) if cfg.data.path else None,
        "package_version": __version__,
    }


def _out(arg, default) -> Path:
    path = Path(arg or default)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _print_json(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sim = dict(cfg.simulate)
    for key in ("n_sections", "samples_per_section", "noise_std"):
        if getattr(args, key, None) is not None:
            sim[key] = getattr(args, key)
    cfg.simulate = sim
    rec = simulate(cfg.sim_config())
    out = _out(args.output, cfg.outputs.dataset)
    write_csv(rec.dataset, out, label_column=cfg.data.label, load_column=cfg.data.load_state or "load_state",
              extra={"relief": rec.relief, "lv": rec.lv, "section": rec.section})
    counts = rec.dataset.class_counts()
    _print_json({"path": str(out), "n_samples": rec.dataset.sample_count,
                 "class_counts": {c: int(n) for c, n in zip(rec.dataset.class_names, counts)}})
    return EXIT_OK


def cmd_label(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise DataError(f"input not found: {src}")
    with src.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = list(reader.fieldnames or [])
        rows = list(reader)
    missing = [c for c in (args.relief_column, args.lv_column, args.load_column) if c not in header]
    if missing:
        raise SchemaError(f"{src}: missing columns {missing}")
    if not rows:
        raise DataError(f"{src}: no data rows")
    try:
        relief = np.array([float(r[args.relief_column]) for r in rows])
        lv = np.array([float(r[args.lv_column]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise DataError(f"{src}: non-numeric relief or L/V value ({exc})") from None
    severity = label_criticality_array(relief, lv, [r[args.load_column].strip() for r in rows])
    out_header = header + ([args.label_column] if args.label_column not in header else [])
    out = _out(args.output, src.with_name(src.stem + "_labelled.csv"))
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, out_header, lineterminator="\n")
        w.writeheader()
        for r, s in zip(rows, severity):
            w.writerow({**r, args.label_column: CLASS_NAMES[int(s)]})
    _print_json({"path": str(out), "n_rows": len(rows),
                 "class_counts": {c: int(np.sum(severity == i)) for i, c in enumerate(CLASS_NAMES)}})
    return EXIT_OK


def _split(cfg: RunConfig, ds: TimeSeriesDataset):
    return train_validation_split(ds, cfg.split.train_fraction, cfg.split.seed)


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = _load_data(cfg)
    train, valid = _split(cfg, ds)
    spec = cfg.model.lag_spec(ds.n_channels)
    log.info("training %s model: degree %d, k_max %d on %d rows", cfg.model.mode, spec.degree,
             cfg.model.k_max, train.sample_count)
    clf = fit(train, spec, cfg.model.k_max, mode=cfg.model.mode, ridge=cfg.model.ridge,
              size_rule=cfg.model.size_rule, n_folds=cfg.split.n_folds, seed=cfg.split.seed)
    prov = _provenance(cfg)
    model_path = _out(args.model, cfg.outputs.model)
    save_model(clf, model_path, prov)
    _, rep = evaluate(clf.target_rows(valid), clf.predict(valid), clf.n_classes, clf.class_labels)
    split = {"n_train": train.sample_count, "n_validation": valid.sample_count,
             "train_fraction": cfg.split.train_fraction,
             "validation_accuracy": rep.accuracy, "validation_weighted_f1": rep.weighted()["f1"]}
    doc = train_report(clf, prov, split)
    report_path = _out(args.report, cfg.outputs.train_report)
    write_json(doc, report_path)
    print(render(doc, str(report_path)))
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _config(args)
    clf = load_model(args.model or cfg.outputs.model)
    ds = _load_data(cfg)
    if ds.channel_names != clf.channel_names:
        raise SchemaError(f"dataset channels differ from the model's: {ds.channel_names} vs {clf.channel_names}")
    used = sorted({c for t in clf.terms for c in t.input_channels})
    if not used:
        raise DataError("the model selected no input terms; nothing to keep")
    reduced = ds.with_channels(ds.channels[:, [c - 1 for c in used]], tuple(clf.channel_names[c - 1] for c in used))
    out = _out(args.output, cfg.outputs.reduced)
    write_csv(reduced, out, label_column=cfg.data.label, load_column=cfg.data.load_state or "load_state")
    _print_json({"path": str(out), "channels": list(reduced.channel_names), "n_rows": reduced.sample_count})
    return EXIT_OK


def _baseline_entries(cfg: RunConfig, train: TimeSeriesDataset, test: TimeSeriesDataset, names) -> dict:
    out = {}
    C = train.class_count
    if "random_forest" in names:
        folds = stratified_folds(train.labels, cfg.split.n_folds, cfg.split.seed)
        gs = grid_search(cfg.baselines.param_grid(), train, folds, cfg.baselines.seed)
        log.info("random forest grid search: best %s (cv accuracy %.4f)", gs.best_params, gs.cv_score)
        cm, rep = evaluate(test.labels, forest_predict(gs.model, test.channels), C, train.class_names)
        out["random_forest"] = model_entry(cm, rep, params=gs.best_params.to_dict(), cv_accuracy=gs.cv_score)
    if "knn" in names:
        scaler = Standardizer.fit(train.channels)
        model = knn_fit(scaler.transform(train.channels), train.labels, cfg.baselines.knn_k, C)
        cm, rep = evaluate(test.labels, knn_predict(model, scaler.transform(test.channels)), C, train.class_names)
        out["knn"] = model_entry(cm, rep, params={"k": cfg.baselines.knn_k})
    return out


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    clf = load_model(args.model or cfg.outputs.model)
    ds = _load_data(cfg)
    if ds.class_names != clf.class_labels:
        raise DataError(f"dataset classes {ds.class_names} differ from the model's {clf.class_labels}")
    train, valid = _split(cfg, ds)
    test, name = (ds, "full dataset") if args.full else (valid, "validation split")
    cm, rep = evaluate(clf.target_rows(test), clf.predict(test), clf.n_classes, clf.class_labels)
    models = {"logistic_narx": model_entry(cm, rep, mode=clf.mode, n_terms=len(clf.terms))}
    names = cfg.baselines.names if args.baselines is None else [n for n in args.baselines.split(",") if n]
    cfg.baselines.names = names
    cfg.baselines.validate()
    models.update(_baseline_entries(cfg, train, test, names))
    doc = evaluation_report(models, _provenance(cfg), {"name": name, "n_rows": test.sample_count})
    out = _out(args.report, cfg.outputs.evaluation)
    write_json(doc, out)
    print(render(doc, str(out)))
    return EXIT_OK


def cmd_predict(args) -> int:
    clf = load_model(args.model)
    path = Path(args.data)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    if any(t.uses_output for t in clf.terms):
        if not args.label_column:
            raise ConfigError("model uses lagged outputs; pass --label-column")
        data = load_csv(path, CsvSchema(args.label_column, clf.channel_names, classes=clf.class_labels))
    else:
        data = load_channels(path, clf.channel_names)
    P = clf.predict_proba(data)
    pred = clf.predict(data)
    offset = clf.spec.max_lag
    out = _out(args.output, path.with_name(path.stem + "_predictions.csv"))
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "predicted", *(f"p_{c}" for c in clf.class_labels)])
        for i, (v, p) in enumerate(zip(pred, P)):
            w.writerow([i + offset, clf.class_labels[v - 1], *(repr(float(x)) for x in p)])
    _print_json({"path": str(out), "n_rows": int(len(pred)),
                 "class_counts": {c: int(np.sum(pred == i + 1)) for i, c in enumerate(clf.class_labels)}})
    return EXIT_OK


def cmd_report(args) -> int:
    doc = read_json(args.input)
    if args.format == "json":
        _print_json(doc)
    else:
        print(render(doc, args.input))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lnarx", description="Logistic-NARX multiclass classification toolkit")
    p.add_argument("--version", action="version", version=f"lnarx {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="YAML/JSON run configuration")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        return sp

    sp = with_config(sub.add_parser("simulate", help="write a synthetic labelled recording"))
    sp.add_argument("--output", "-o", help="CSV to write (default outputs.dataset)")
    sp.add_argument("--n-sections", type=int)
    sp.add_argument("--samples-per-section", type=int)
    sp.add_argument("--noise-std", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("label", help="append a criticality column from relief, L/V and load state")
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--output", "-o")
    sp.add_argument("--relief-column", default="relief")
    sp.add_argument("--lv-column", default="lv")
    sp.add_argument("--load-column", default="load_state")
    sp.add_argument("--label-column", default="criticality")
    sp.set_defaults(func=cmd_label)

    sp = with_config(sub.add_parser("train", help="select terms and fit the classifier"))
    sp.add_argument("--data", help="dataset CSV (overrides data.path)")
    sp.add_argument("--model", help="model file to write (default outputs.model)")
    sp.add_argument("--report", help="training report to write (default outputs.train_report)")
    sp.add_argument("--k-max", type=int)
    sp.add_argument("--mode", choices=("pooled", "per-class"))
    sp.add_argument("--degree", type=int)
    sp.set_defaults(func=cmd_train)

    sp = with_config(sub.add_parser("select", help="write the dataset reduced to the selected channels"))
    sp.add_argument("--data")
    sp.add_argument("--model")
    sp.add_argument("--output", "-o")
    sp.set_defaults(func=cmd_select)

    sp = with_config(sub.add_parser("evaluate", help="score the model and the baselines"))
    sp.add_argument("--data")
    sp.add_argument("--model")
    sp.add_argument("--report")
    sp.add_argument("--baselines", help="comma-separated subset of random_forest,knn ('' for none)")
    sp.add_argument("--full", action="store_true", help="score on the whole file instead of the validation split")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="write predicted labels for a CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--output", "-o")
    sp.add_argument("--label-column", help="needed only by models with lagged-output terms")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("report", help="render a model file or report as text")
    sp.add_argument("input")
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except LnarxError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
