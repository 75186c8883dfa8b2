"""Structured run reports and their plain-text rendering."""

from __future__ import annotations

from .errors import DataError
from .metrics import ConfusionMatrix, MetricReport
from .modelfile import FORMAT_VERSION, MODEL_KIND, check_version, model_from_dict
from .multiclass import MultinomialNarxClassifier, feature_importance

TRAIN_KIND = "lnarx-train-report"
EVAL_KIND = "lnarx-evaluation-report"

# column headings of the comparison table, in display order
SUMMARY_NAMES = ("Average Accuracy", "Sensitivity", "Specificity", "Precision", "F1 Score")


def metric_summary(report: MetricReport) -> dict:
    mac = report.macro()
    return {
        "Average Accuracy": report.accuracy,
        "Sensitivity": mac["sensitivity"],
        "Specificity": mac["specificity"],
        "Precision": mac["precision"],
        "F1 Score": mac["f1"],
        "Weighted F1": report.weighted()["f1"],
        "Balanced Accuracy": report.balanced_accuracy,
    }


def model_entry(cm: ConfusionMatrix, report: MetricReport, **extra) -> dict:
    return {
        "summary": metric_summary(report),
        "metrics": report.to_dict(),
        "confusion": {
            "labels": list(cm.class_labels),
            "counts": cm.counts,
            "row_percent": cm.row_normalized(),
        },
        **extra,
    }


def train_report(clf: MultinomialNarxClassifier, provenance: dict, split: dict) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": TRAIN_KIND,
        "mode": clf.mode,
        "spec": clf.spec.to_dict(),
        "class_labels": list(clf.class_labels),
        "selection": list(clf.selection),
        "importance": feature_importance(clf).table(),
        "split": split,
        "provenance": provenance,
    }


def evaluation_report(models: dict, provenance: dict, eval_set: dict) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": EVAL_KIND,
        "metric_names": list(SUMMARY_NAMES),
        "models": models,
        "evaluation_set": eval_set,
        "provenance": provenance,
    }


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _render_selection(selection) -> str:
    out = []
    for run in selection:
        out.append(f"selection [{run['target']}]: kept {run['chosen_size']} of {len(run['steps'])} steps")
        rows = [["step", "term", "score", "cv mean", "cv std"]]
        for i, s in enumerate(run["steps"], start=1):
            mark = "*" if i <= run["chosen_size"] else " "
            rows.append([f"{i}{mark}", s["term"], f"{s['score']:.4f}", f"{s['cv_mean']:.4f}", f"{s['cv_std']:.4f}"])
        out.append(_table(rows))
    return "\n\n".join(out)


def _render_importance(table, class_labels) -> str:
    rows = [["term", "score", "feature", *(f"theta[{c}]" for c in class_labels)]]
    for r in table:
        rows.append([r["term"], f"{r['score']:.4f}", r["feature"],
                     *(f"{r['parameter'][c]:+.4f}" if c in r["parameter"] else "-" for c in class_labels)])
    return _table(rows)


def _render_confusion(conf: dict) -> str:
    labels = conf["labels"]
    rows = [["true \\ pred", *labels]]
    for name, row in zip(labels, conf["row_percent"]):
        rows.append([name, *(f"{v:.1f}%" for v in row)])
    return _table(rows)


def render(doc: dict, source="<document>") -> str:
    """Human-readable text for a model file or either report kind."""
    kind = doc.get("kind")
    if kind == MODEL_KIND:
        clf = model_from_dict(doc, source)
        table = feature_importance(clf).table()
        return "\n\n".join([
            f"model: {clf.mode}, {clf.n_classes} classes, {len(clf.terms)} distinct terms",
            _render_importance(table, clf.class_labels),
            _render_selection(doc.get("selection", [])),
        ])
    if kind == TRAIN_KIND:
        check_version(doc, TRAIN_KIND, source)
        split = doc.get("split", {})
        return "\n\n".join([
            f"training report: {doc['mode']}, n_train={split.get('n_train')}, n_validation={split.get('n_validation')}",
            _render_importance(doc["importance"], doc["class_labels"]),
            _render_selection(doc["selection"]),
        ])
    if kind == EVAL_KIND:
        check_version(doc, EVAL_KIND, source)
        names = doc["metric_names"]
        rows = [["model", *names, "Weighted F1"]]
        for model, entry in doc["models"].items():
            s = entry["summary"]
            rows.append([model, *(f"{s[n]:.4f}" for n in names), f"{s['Weighted F1']:.4f}"])
        parts = [f"evaluation on {doc['evaluation_set'].get('name')} (n={doc['evaluation_set'].get('n_rows')})",
                 _table(rows)]
        for model, entry in doc["models"].items():
            per = entry["metrics"]["per_class"]
            crow = [["class", "Precision", "Sensitivity", "Specificity", "F1 Score", "support"]]
            for c in entry["confusion"]["labels"]:
                m = per[c]
                flag = " (undefined: " + ", ".join(m["undefined"]) + ")" if m["undefined"] else ""
                crow.append([c, f"{m['precision']:.4f}", f"{m['sensitivity']:.4f}", f"{m['specificity']:.4f}",
                             f"{m['f1']:.4f}{flag}", str(m["support"])])
            parts.append(f"[{model}]\n" + _table(crow) + "\n\nconfusion (row %):\n" + _render_confusion(entry["confusion"]))
        return "\n\n".join(parts)
    raise DataError(f"{source}: unknown document kind {kind!r}")
