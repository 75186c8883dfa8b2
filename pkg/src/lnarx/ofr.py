"""Orthogonal forward selection of NARX terms scored by logistic accuracy.

At every step each surviving candidate column is orthogonalised against the
terms already chosen (modified Gram-Schmidt), dropped if the residual is
numerically zero, and otherwise scored by the training accuracy of a
one-feature logistic model on its normalised residual.  The best candidate
joins the model; its original column is used for the coefficient refit and
its residual extends the orthonormal basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import FoldPlan, stratified_folds
from .errors import ConfigError, SelectionError
from .logistic import (
    DEFAULT_RIDGE,
    LogisticModel,
    accuracy,
    argmax_rows,
    fit_mle,
    fit_one_vs_all,
    univariate_accuracies,
)
from .terms import CandidateTerm, TermLibrary

ELIMINATION_THRESHOLD = 1e-10
REORTH_THRESHOLD = 1e-10


class DegenerateColumnError(SelectionError):
    """Column has zero norm and must be removed from the candidate set."""


@dataclass
class OrthogonalBasis:
    """Orthonormal columns ``q_1 .. q_s`` of length ``N_eff``."""

    n_rows: int
    _cols: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return len(self._cols)

    @property
    def Q(self) -> np.ndarray:
        if not self._cols:
            return np.empty((self.n_rows, 0))
        return np.column_stack(self._cols)

    def append(self, q: np.ndarray):
        self._cols.append(np.asarray(q, dtype=float).copy())

    def max_offdiag(self) -> float:
        if self.size < 2:
            return 0.0
        G = self.Q.T @ self.Q
        return float(np.max(np.abs(G - np.diag(np.diag(G)))))


def normalize_column(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    norm = np.linalg.norm(phi)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateColumnError("zero-norm column")
    return phi / norm


def orthogonalize(phi, basis: OrthogonalBasis | np.ndarray) -> np.ndarray:
    """Residual of ``phi`` after removing its projection on the basis.

    Modified Gram-Schmidt, with a second pass when the first leaves a
    projection above 1e-10.
    """
    Q = basis.Q if isinstance(basis, OrthogonalBasis) else np.asarray(basis, dtype=float)
    r = np.array(phi, dtype=float)
    if Q.shape[1] == 0:
        return r
    for _ in range(2):
        for j in range(Q.shape[1]):
            r -= (Q[:, j] @ r) * Q[:, j]
        if np.max(np.abs(Q.T @ r)) <= REORTH_THRESHOLD:
            break
    return r


# --------------------------------------------------------------------------
# Trace types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionStep:
    """One greedy step: the chosen candidate and how it scored."""

    index: int
    term: CandidateTerm
    score: float
    class_scores: tuple[float, ...]
    cv_mean: float
    cv_std: float
    n_scored: int
    max_offdiag: float


@dataclass(frozen=True)
class SelectionTrace:
    """Outcome of forward selection on one term library.

    ``final_models`` has one model for a binary selection and one per class
    for a pooled one; all are fitted on the original (non-orthogonalised)
    columns of the selected terms, in selection order.
    """

    steps: tuple[SelectionStep, ...]
    eliminated: tuple[int, ...]
    final_models: tuple[LogisticModel, ...]
    basis: np.ndarray = field(repr=False)
    candidate_scores: tuple[dict, ...] = field(default=(), repr=False)
    pooled: bool = False

    @property
    def selected_indices(self) -> list[int]:
        return [s.index for s in self.steps]

    @property
    def terms(self) -> list[CandidateTerm]:
        return [s.term for s in self.steps]

    @property
    def scores(self) -> np.ndarray:
        return np.array([s.score for s in self.steps])

    @property
    def cv_means(self) -> np.ndarray:
        return np.array([s.cv_mean for s in self.steps])

    @property
    def cv_stds(self) -> np.ndarray:
        return np.array([s.cv_std for s in self.steps])

    @property
    def final_model(self) -> LogisticModel:
        if len(self.final_models) != 1:
            raise AttributeError("pooled trace has one model per class; use final_models")
        return self.final_models[0]

    def truncated(self, size: int, library: TermLibrary, targets,
                  ridge: float = DEFAULT_RIDGE) -> "SelectionTrace":
        """First ``size`` steps with the final model(s) refitted on them."""
        if not 1 <= size <= len(self.steps):
            raise ConfigError(f"model size {size} outside 1..{len(self.steps)}")
        steps = self.steps[:size]
        X = library.columns([s.index for s in steps])
        if self.pooled:
            models = fit_one_vs_all(X, targets, len(self.final_models), ridge)
        else:
            models = [fit_mle(X, targets, ridge)]
        return SelectionTrace(steps, self.eliminated, tuple(models), self.basis[:, :size],
                              self.candidate_scores[:size], self.pooled)


# --------------------------------------------------------------------------
# Greedy core
# --------------------------------------------------------------------------

# maps an (n, m) block of unit candidate columns to (scores (m,), parts (m, c))
Scorer = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def binary_scorer(y, ridge: float = DEFAULT_RIDGE) -> Scorer:
    """Training accuracy of a one-feature logistic fit against 0/1 ``y``."""
    y = np.asarray(y, dtype=float)

    def score(W):
        acc = univariate_accuracies(W, y, ridge)
        return acc, acc[:, None]

    return score


def pooled_scorer(labels, n_classes: int, ridge: float = DEFAULT_RIDGE) -> Scorer:
    """Mean over classes of the one-versus-all one-feature accuracies."""
    targets = [(np.asarray(labels) == v).astype(float) for v in range(1, n_classes + 1)]

    def score(W):
        parts = np.column_stack([univariate_accuracies(W, t, ridge) for t in targets])
        return parts.mean(axis=1), parts

    return score


@dataclass
class _GreedyResult:
    picks: list  # (index, score, class_scores, n_scored, max_offdiag)
    eliminated: list
    basis: OrthogonalBasis
    candidate_scores: list


def _greedy(X: np.ndarray, scorer: Scorer, k_max: int) -> _GreedyResult:
    n, m = X.shape
    norms = np.linalg.norm(X, axis=0)
    W = np.zeros_like(X, dtype=float)
    alive = []
    eliminated = []
    for i in range(m):
        if norms[i] > 0 and np.isfinite(norms[i]):
            W[:, i] = X[:, i] / norms[i]
            alive.append(i)
        else:
            eliminated.append(i)
    basis = OrthogonalBasis(n)
    picks, cand_scores = [], []
    for s in range(k_max):
        if basis.size:
            q = basis._cols[-1]
            idx = np.array(alive, dtype=int)
            if idx.size:
                W[:, idx] -= np.outer(q, q @ W[:, idx])
                P = basis.Q.T @ W[:, idx]
                redo = np.max(np.abs(P), axis=0) > REORTH_THRESHOLD
                if redo.any():
                    cols = idx[redo]
                    W[:, cols] -= basis.Q @ P[:, redo]
                sq = np.einsum("ij,ij->j", W[:, idx], W[:, idx])
                dead = idx[sq < ELIMINATION_THRESHOLD]
                eliminated.extend(int(i) for i in dead)
                dead_set = set(dead.tolist())
                alive = [i for i in alive if i not in dead_set]
        if not alive:
            break
        idx = np.array(alive, dtype=int)
        block = W[:, idx] / np.linalg.norm(W[:, idx], axis=0)
        sc, parts = scorer(block)
        j = int(np.argmax(sc))  # alive is ascending, so ties go to the lowest index
        best = int(idx[j])
        basis.append(block[:, j])
        alive.remove(best)
        picks.append((best, float(sc[j]), tuple(float(v) for v in parts[j]), len(idx), basis.max_offdiag()))
        cand_scores.append({int(i): float(v) for i, v in zip(idx, sc)})
    return _GreedyResult(picks, eliminated, basis, cand_scores)


def _check_inputs(library: TermLibrary, k_max: int, folds: FoldPlan | None, labels) -> tuple[int, FoldPlan]:
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    if library.m == 0:
        raise ConfigError("empty term library")
    if k_max > library.m:
        warnings.warn(f"k_max={k_max} exceeds the {library.m} candidates; truncating", stacklevel=3)
        k_max = library.m
    if folds is None:
        folds = stratified_folds(labels, min(5, len(labels)), 0)
    if folds.n_samples != library.n_eff:
        raise ConfigError(f"fold plan covers {folds.n_samples} rows, library has {library.n_eff}")
    return k_max, folds


def _cv_binary(X, y, folds: FoldPlan, ridge) -> tuple[float, float]:
    accs = []
    for tr, te in folds.splits():
        model = fit_mle(X[tr], y[tr], ridge)
        accs.append(accuracy(model, X[te], y[te]))
    return float(np.mean(accs)), float(np.std(accs))


def _cv_multiclass(X, labels, n_classes, folds: FoldPlan, ridge) -> tuple[float, float]:
    accs = []
    for tr, te in folds.splits():
        models = fit_one_vs_all(X[tr], labels[tr], n_classes, ridge)
        P = np.column_stack([mdl.predict_proba(X[te]) for mdl in models])
        accs.append(float(np.mean(argmax_rows(P) == labels[te])))
    return float(np.mean(accs)), float(np.std(accs))


def select_terms(library: TermLibrary, y_binary, k_max: int, folds: FoldPlan | None = None,
                 ridge: float = DEFAULT_RIDGE) -> SelectionTrace:
    """Greedy orthogonal forward selection against a binary target.

    Parameters
    ----------
    library : TermLibrary
        Candidate columns, one row per usable time index.
    y_binary : array of 0/1, length ``library.n_eff``
    k_max : int
        Maximum number of terms to select.
    folds : FoldPlan, optional
        Folds over the library rows for the per-step cross-validated
        accuracy; defaults to 5 stratified folds with seed 0.  Selection
        itself always uses all rows.
    ridge : float
        Ridge penalty for every logistic fit.
    """
    y = np.asarray(y_binary, dtype=float)
    if len(y) != library.n_eff:
        raise ConfigError("target length differs from library rows")
    if y.min() == y.max():
        raise ConfigError("both classes must be present")
    k_max, folds = _check_inputs(library, k_max, folds, y)
    res = _greedy(library.design_matrix, binary_scorer(y, ridge), k_max)
    return _finish(res, library, folds, ridge,
                   cv=lambda X: _cv_binary(X, y, folds, ridge),
                   refit=lambda X: [fit_mle(X, y, ridge)], pooled=False)


def select_terms_pooled(library: TermLibrary, labels, n_classes: int, k_max: int,
                        folds: FoldPlan | None = None, ridge: float = DEFAULT_RIDGE) -> SelectionTrace:
    """Forward selection of one term set shared by all one-versus-all heads.

    Candidates are scored by the mean of the ``n_classes`` one-feature
    accuracies; the per-step CV figure is the multiclass (argmax) accuracy.
    """
    labels = np.asarray(labels, dtype=int)
    if len(labels) != library.n_eff:
        raise ConfigError("label length differs from library rows")
    k_max, folds = _check_inputs(library, k_max, folds, labels)
    res = _greedy(library.design_matrix, pooled_scorer(labels, n_classes, ridge), k_max)
    return _finish(res, library, folds, ridge,
                   cv=lambda X: _cv_multiclass(X, labels, n_classes, folds, ridge),
                   refit=lambda X: fit_one_vs_all(X, labels, n_classes, ridge), pooled=True)


def _finish(res: _GreedyResult, library, folds, ridge, cv, refit, pooled) -> SelectionTrace:
    if not res.picks:
        raise SelectionError("every candidate was eliminated before a term could be selected")
    steps = []
    for s, (idx, score, parts, n_scored, offdiag) in enumerate(res.picks, start=1):
        X = library.columns([p[0] for p in res.picks[:s]])
        mean, std = cv(X)
        steps.append(SelectionStep(idx, library.terms[idx], score, parts, mean, std, n_scored, offdiag))
    X = library.columns([p[0] for p in res.picks])
    return SelectionTrace(tuple(steps), tuple(res.eliminated), tuple(refit(X)),
                          res.basis.Q, tuple(res.candidate_scores), pooled)


def choose_model_size(trace: SelectionTrace | Sequence, rule: str | int = "one-se") -> int:
    """Number of leading terms to keep.

    ``"one-se"`` picks the smallest size whose CV mean is within one CV
    standard deviation (taken at the best size) of the best CV mean.  An
    integer fixes the size, capped at the trace length.  ``"all"`` keeps
    every selected term.
    """
    if isinstance(trace, SelectionTrace):
        means, stds = trace.cv_means, trace.cv_stds
    else:
        means, stds = (np.asarray(a, dtype=float) for a in trace)
    if len(means) == 0:
        raise ConfigError("empty selection trace")
    if rule == "all":
        return len(means)
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        if rule < 1:
            raise ConfigError("fixed model size must be >= 1")
        return int(min(rule, len(means)))
    if rule != "one-se":
        raise ConfigError(f"unknown model-size rule {rule!r}")
    best = int(np.argmax(means))
    threshold = means[best] - stds[best]
    return int(np.flatnonzero(means >= threshold)[0]) + 1
