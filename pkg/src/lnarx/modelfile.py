"""JSON persistence for fitted classifiers and run reports.

Files are UTF-8 JSON written with sorted keys and a fixed indent so that
identical fits produce identical bytes.  Floats go through ``repr`` (via
``json``), which round-trips every IEEE double exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .dataset import Standardizer
from .errors import ConfigError, DataError
from .logistic import LogisticModel
from .multiclass import ClassHead, MultinomialNarxClassifier
from .terms import CandidateTerm, LagSpec

FORMAT_VERSION = 1
MODEL_KIND = "lnarx-model"


class FormatVersionError(DataError):
    """File written by an incompatible version of the format."""


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object")
    return doc


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(dumps(config).encode()).hexdigest()


def model_to_dict(clf: MultinomialNarxClassifier, provenance: dict | None = None) -> dict:
    heads = []
    for label, head in zip(clf.class_labels, clf.heads):
        m = head.model
        heads.append({
            "class": label,
            "terms": [str(t) for t in head.terms],
            "scores": list(head.scores),
            "bias": m.bias,
            "weights": list(m.weights),
            "converged": m.converged,
            "iterations": m.iterations,
            "ridge_fallback": m.ridge_fallback,
        })
    return {
        "format_version": FORMAT_VERSION,
        "kind": MODEL_KIND,
        "class_labels": list(clf.class_labels),
        "channel_names": list(clf.channel_names),
        "spec": clf.spec.to_dict(),
        "mode": clf.mode,
        "ridge": clf.ridge,
        "standardizer": {"mean": clf.standardizer.mean, "std": clf.standardizer.std},
        "heads": heads,
        "selection": list(clf.selection),
        "provenance": dict(provenance or {}),
    }


def check_version(doc: dict, kind: str, path="<document>") -> None:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: format_version {version!r} is not supported (expected {FORMAT_VERSION})")
    if doc.get("kind") != kind:
        raise DataError(f"{path}: expected a {kind!r} document, found {doc.get('kind')!r}")


def model_from_dict(doc: dict, path="<document>") -> MultinomialNarxClassifier:
    check_version(doc, MODEL_KIND, path)
    try:
        spec = LagSpec.from_dict(doc["spec"])
        scaler = Standardizer(np.asarray(doc["standardizer"]["mean"], dtype=float),
                              np.asarray(doc["standardizer"]["std"], dtype=float))
        heads = []
        for h in doc["heads"]:
            terms = tuple(CandidateTerm.parse(t) for t in h["terms"])
            weights = np.asarray(h["weights"], dtype=float)
            if len(weights) != len(terms):
                raise DataError(f"{path}: head {h.get('class')!r} has {len(terms)} terms but {len(weights)} weights")
            model = LogisticModel(weights, float(h["bias"]), float(doc["ridge"]),
                                  bool(h.get("converged", True)), int(h.get("iterations", 0)),
                                  bool(h.get("ridge_fallback", False)))
            heads.append(ClassHead(terms, tuple(float(s) for s in h["scores"]), model))
        return MultinomialNarxClassifier(
            tuple(doc["class_labels"]), tuple(doc["channel_names"]), spec, scaler, tuple(heads),
            doc["mode"], float(doc["ridge"]), tuple(doc.get("selection", ())),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed model file ({exc!r})") from None
    except ConfigError as exc:
        raise DataError(f"{path}: inconsistent model file ({exc})") from None


def save_model(clf: MultinomialNarxClassifier, path, provenance: dict | None = None) -> None:
    write_json(model_to_dict(clf, provenance), path)


def load_model(path) -> MultinomialNarxClassifier:
    return model_from_dict(read_json(path), path)
