"""One-versus-all assembly of logistic-NARX heads into a multiclass model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FoldPlan, Standardizer, TimeSeriesDataset, standardize, stratified_folds
from .errors import ConfigError, DataError
from .logistic import DEFAULT_RIDGE, LogisticModel, argmax_rows
from .ofr import SelectionTrace, choose_model_size, select_terms, select_terms_pooled
from .terms import CandidateTerm, LagSpec, build_design_matrix, enumerate_terms

MODES = ("pooled", "per-class")


@dataclass(frozen=True)
class ClassHead:
    """Binary model ``f_v`` for one class: its terms, their selection scores
    and the logistic coefficients (same order as ``terms``)."""

    terms: tuple[CandidateTerm, ...]
    scores: tuple[float, ...]
    model: LogisticModel


@dataclass(frozen=True)
class MultinomialNarxClassifier:
    """Fitted one-versus-all logistic-NARX classifier.

    Inputs are standardised with ``standardizer`` before the terms are
    evaluated.  ``selection`` keeps one record per selection run (one for
    pooled mode, one per class otherwise) with the full step table up to
    ``k_max`` and the size actually kept; ``traces`` holds the untruncated
    :class:`SelectionTrace` objects and is not persisted.
    """

    class_labels: tuple[str, ...]
    channel_names: tuple[str, ...]
    spec: LagSpec
    standardizer: Standardizer
    heads: tuple[ClassHead, ...]
    mode: str = "pooled"
    ridge: float = DEFAULT_RIDGE
    selection: tuple[dict, ...] = ()
    traces: tuple[SelectionTrace, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.class_labels) < 2:
            raise ConfigError("need at least two classes")
        if len(self.heads) != len(self.class_labels):
            raise ConfigError("one head per class required")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def terms(self) -> tuple[CandidateTerm, ...]:
        """Distinct terms over all heads in first-use order."""
        seen: dict[CandidateTerm, None] = {}
        for h in self.heads:
            for t in h.terms:
                seen.setdefault(t, None)
        return tuple(seen)

    def _design(self, data) -> np.ndarray:
        terms = self.terms
        if isinstance(data, TimeSeriesDataset):
            ds = data
            if ds.channel_names != self.channel_names:
                raise ConfigError(f"dataset channels {ds.channel_names} differ from model channels {self.channel_names}")
        else:
            X = np.asarray(data, dtype=float)
            if X.ndim == 1:
                X = X[None, :]
            if X.ndim != 2 or X.shape[1] != len(self.channel_names):
                raise ConfigError(f"expected {len(self.channel_names)} channels, got shape {X.shape}")
            if any(t.uses_output for t in terms):
                raise ConfigError("model has output-lag terms; pass a dataset with labels")
            ds = TimeSeriesDataset(X, np.ones(len(X), dtype=int), self.channel_names, self.class_labels)
        ds = self.standardizer.apply(ds)
        lib = build_design_matrix(ds, terms, max_lag=self.spec.max_lag, min_rows=1)
        return lib.design_matrix

    def predict_proba(self, data) -> np.ndarray:
        """``(N_eff, C)`` matrix of head probabilities.

        Rows are not normalised: each column is an independent binary model,
        so rows need not sum to one.
        """
        D = self._design(data)
        index = {t: j for j, t in enumerate(self.terms)}
        cols = []
        for h in self.heads:
            cols.append(h.model.predict_proba(D[:, [index[t] for t in h.terms]]))
        return np.column_stack(cols)

    def predict(self, data) -> np.ndarray:
        """Class index ``1..C`` of the most probable head (lowest index on ties)."""
        return argmax_rows(self.predict_proba(data))

    def predict_labels(self, data) -> list[str]:
        return [self.class_labels[v - 1] for v in self.predict(data)]

    def target_rows(self, ds: TimeSeriesDataset) -> np.ndarray:
        """Labels aligned with the rows returned by ``predict``."""
        return ds.labels[self.spec.max_lag:]


def default_spec(n_inputs: int, degree: int = 2) -> LagSpec:
    """Static polynomial expansion over contemporaneous inputs."""
    return LagSpec(degree=degree, n_y=0, n_u=0, n_inputs=n_inputs, allow_lag_zero_inputs=True)


def _step_table(trace: SelectionTrace) -> list[dict]:
    return list(
        {
            "term": str(s.term),
            "score": s.score,
            "class_scores": list(s.class_scores),
            "cv_mean": s.cv_mean,
            "cv_std": s.cv_std,
        }
        for s in trace.steps
    )


def fit(ds: TimeSeriesDataset, spec: LagSpec | None = None, k_max: int = 10,
        folds: FoldPlan | None = None, mode: str = "pooled", ridge: float = DEFAULT_RIDGE,
        size_rule: str | int = "one-se", n_folds: int = 5, seed: int = 0) -> MultinomialNarxClassifier:
    """Standardise, enumerate terms, select and fit the one-versus-all heads.

    ``folds`` must cover the usable rows (``N - spec.max_lag``); by default
    ``n_folds`` stratified folds are drawn with ``seed``.  ``size_rule`` is
    passed to :func:`choose_model_size` to cut each selection trace.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if ds.class_count < 2:
        raise DataError("need at least two classes")
    ds.require_all_classes()
    spec = spec or default_spec(ds.n_channels)
    if spec.n_inputs != ds.n_channels:
        raise ConfigError(f"lag spec has {spec.n_inputs} inputs, dataset has {ds.n_channels}")
    std_ds, scaler = standardize(ds)
    lib = build_design_matrix(std_ds, enumerate_terms(spec), max_lag=spec.max_lag)
    targets = lib.targets
    C = ds.class_count
    if np.any(np.bincount(targets - 1, minlength=C) == 0):
        raise DataError("a class has no samples after the lag offset")
    if folds is None:
        folds = stratified_folds(targets, n_folds, seed)

    tables = []
    if mode == "pooled":
        full = select_terms_pooled(lib, targets, C, k_max, folds, ridge)
        size = choose_model_size(full, size_rule)
        trace = full.truncated(size, lib, targets, ridge)
        heads = tuple(
            ClassHead(tuple(trace.terms), tuple(s.class_scores[v] for s in trace.steps), trace.final_models[v])
            for v in range(C)
        )
        traces = (full,)
        tables.append({"target": "pooled", "chosen_size": size, "steps": _step_table(full)})
    else:
        heads, traces = [], []
        for v in range(1, C + 1):
            yb = (targets == v).astype(float)
            full = select_terms(lib, yb, k_max, folds, ridge)
            size = choose_model_size(full, size_rule)
            trace = full.truncated(size, lib, yb, ridge)
            heads.append(ClassHead(tuple(trace.terms), tuple(trace.scores), trace.final_model))
            traces.append(full)
            tables.append({"target": ds.class_names[v - 1], "chosen_size": size, "steps": _step_table(full)})
        heads, traces = tuple(heads), tuple(traces)

    return MultinomialNarxClassifier(
        ds.class_names, ds.channel_names, spec, scaler, heads, mode, ridge, tuple(tables), traces,
    )


# --------------------------------------------------------------------------
# Feature importance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ImportanceRow:
    term: str
    features: tuple[str, ...]
    classes: tuple[str, ...]
    class_scores: dict
    coefficients: dict
    rank: int
    pooled: bool = False

    @property
    def score(self) -> float:
        """Pooled runs share one score per step (the class mean); per-class
        runs report the best head."""
        vals = list(self.class_scores.values())
        return float(np.mean(vals)) if self.pooled else max(vals)


@dataclass(frozen=True)
class ImportanceReport:
    """Selected terms ranked by score (see :attr:`ImportanceRow.score`).

    Coefficients are reported per class: a single column cannot describe
    several one-versus-all heads.
    """

    rows: tuple[ImportanceRow, ...]
    class_labels: tuple[str, ...]

    def table(self) -> list[dict]:
        """One dict per term with ``term``, ``score``, ``feature``, ``parameter``."""
        return [
            {
                "term": r.term,
                "score": r.score,
                "feature": " x ".join(r.features),
                "parameter": dict(r.coefficients),
                "classes": list(r.classes),
                "rank": r.rank,
            }
            for r in self.rows
        ]

    def render(self) -> str:
        head = ["term", "score", "feature"] + [f"theta[{c}]" for c in self.class_labels]
        lines = [head]
        for r in self.rows:
            line = [r.term, f"{r.score:.4f}", " x ".join(r.features)]
            line += [f"{r.coefficients[c]:+.4f}" if c in r.coefficients else "-" for c in self.class_labels]
            lines.append(line)
        widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in lines)


def feature_importance(clf: MultinomialNarxClassifier) -> ImportanceReport:
    info: dict[CandidateTerm, dict] = {}
    for v, head in enumerate(clf.heads):
        name = clf.class_labels[v]
        for pos, (t, sc, coef) in enumerate(zip(head.terms, head.scores, head.model.weights), start=1):
            d = info.setdefault(t, {"classes": [], "scores": {}, "coefs": {}, "rank": pos})
            d["classes"].append(name)
            d["scores"][name] = float(sc)
            d["coefs"][name] = float(coef)
            d["rank"] = min(d["rank"], pos)
    rows = [
        ImportanceRow(
            str(t),
            tuple(clf.channel_names[c - 1] for c in t.input_channels) + (("y",) if t.uses_output else ()),
            tuple(d["classes"]),
            d["scores"],
            d["coefs"],
            d["rank"],
            clf.mode == "pooled",
        )
        for t, d in info.items()
    ]
    rows.sort(key=lambda r: (-r.score, r.rank))
    return ImportanceReport(tuple(rows), clf.class_labels)
