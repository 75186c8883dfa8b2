"""Logistic-NARX multinomial classification.

Polynomial NARX candidate terms are chosen by orthogonal forward selection
scored with one-dimensional logistic accuracy, and the per-class logistic
models are combined one-versus-all into a multiclass classifier.  A railway
criticality labelling module and two reference classifiers (KNN, random
forest) are included for the track-assessment workflow.
"""

from .dataset import (
    CsvSchema,
    FoldPlan,
    Standardizer,
    TimeSeriesDataset,
    load_csv,
    make_folds,
    standardize,
    train_validation_split,
)
from .logistic import LogisticModel, fit_mle
from .multiclass import MultinomialNarxClassifier, feature_importance, fit
from .ofr import SelectionTrace, choose_model_size, select_terms
from .terms import CandidateTerm, LagSpec, build_design_matrix, enumerate_terms

__version__ = "0.1.0"

__all__ = [
    "CandidateTerm",
    "CsvSchema",
    "FoldPlan",
    "LagSpec",
    "LogisticModel",
    "MultinomialNarxClassifier",
    "SelectionTrace",
    "Standardizer",
    "TimeSeriesDataset",
    "build_design_matrix",
    "choose_model_size",
    "enumerate_terms",
    "feature_importance",
    "fit",
    "fit_mle",
    "load_csv",
    "make_folds",
    "select_terms",
    "standardize",
    "train_validation_split",
]
