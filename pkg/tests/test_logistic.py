import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lnarx.errors import ConfigError
from lnarx.logistic import (
    LogisticModel,
    accuracy,
    argmax_rows,
    fit_mle,
    fit_univariate_batch,
    log_likelihood_and_gradient,
    predict_proba,
    univariate_accuracies,
)


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_gradient_at_zero():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 3))
    y = (rng.random(8) < 0.5).astype(float)
    ell, g = log_likelihood_and_gradient(np.zeros(3), 0.0, X, y, 0.0)
    assert ell == pytest.approx(8 * math.log(0.5))
    np.testing.assert_allclose(g[1:], X.T @ (y - 0.5), atol=1e-14)
    np.testing.assert_allclose(g[0], np.sum(y - 0.5), atol=1e-14)


def test_ridge_term_in_gradient():
    rng = np.random.default_rng(1)
    X, y, w = rng.normal(size=(6, 2)), np.array([0, 1, 1, 0, 1, 0.0]), np.array([0.3, -0.7])
    _, g0 = log_likelihood_and_gradient(w, 0.2, X, y, 0.0)
    _, g1 = log_likelihood_and_gradient(w, 0.2, X, y, 0.5)
    np.testing.assert_allclose(g1[1:] - g0[1:], -0.5 * w, atol=1e-15)
    assert g1[0] == g0[0]


@given(st.integers(0, 10_000), st.sampled_from([0.0, 1e-4, 0.3]))
def test_gradient_matches_finite_differences(seed, ridge):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 3))
    y = (rng.random(5) < 0.5).astype(float)
    beta = rng.normal(size=4)
    f = lambda b: log_likelihood_and_gradient(b[1:], b[0], X, y, ridge)[0]  # noqa: E731
    _, g = log_likelihood_and_gradient(beta[1:], beta[0], X, y, ridge)
    assert np.max(np.abs(g - central_diff(f, beta))) < 1e-5


@given(st.integers(0, 10_000))
def test_history_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = (X @ rng.normal(size=3) + rng.normal(size=40) > 0).astype(float)
    if y.min() == y.max():
        return
    model = fit_mle(X, y)
    h = np.array(model.history)
    assert np.all(np.diff(h) >= 0)


def test_separated_data_and_grid_oracle():
    x = np.array([-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0])
    y = (x > 0).astype(float)
    model = fit_mle(x[:, None], y, ridge=1e-4)
    assert model.converged
    assert accuracy(model, x[:, None], y) == 1.0
    # coarse grid search finds the same optimum accuracy
    best = max(np.mean(((b + w * x) >= 0) == y) for b in np.linspace(-2, 2, 21) for w in np.linspace(-5, 5, 21))
    assert best == 1.0


def test_single_class_gives_bias_only():
    X = np.random.default_rng(2).normal(size=(10, 2))
    model = fit_mle(X, np.zeros(10))
    assert np.all(model.weights == 0)
    assert np.all(model.predict_proba(X) < 0.5)
    assert model.predict_proba(X)[0] == pytest.approx(0.5 / 11)


def test_fit_errors():
    with pytest.raises(ConfigError):
        fit_mle(np.array([[np.nan], [1.0]]), np.array([0, 1.0]))
    with pytest.raises(ConfigError):
        fit_mle(np.ones((3, 1)), np.array([0, 2, 1.0]))
    with pytest.raises(ConfigError):
        fit_mle(np.ones((3, 1)), np.array([0, 1.0]))


def test_singular_hessian_falls_back():
    rng = np.random.default_rng(3)
    x = rng.normal(size=30)
    X = np.column_stack([x, x])  # exactly collinear
    y = (x + 0.5 * rng.normal(size=30) > 0).astype(float)
    model = fit_mle(X, y, ridge=0.0)
    assert model.ridge_fallback and model.ridge == 1e-8
    assert np.all(np.isfinite(model.weights))


def test_predict_proba_examples():
    X = np.array([[0.0], [1.0], [-4.0]])
    np.testing.assert_array_equal(LogisticModel(np.zeros(1), 0.0).predict_proba(X), 0.5)
    assert np.all(LogisticModel(np.zeros(1), 30.0).predict_proba(X) > 1 - 1e-9)
    assert predict_proba(LogisticModel(np.ones(1), 0.0), [[math.log(3)]])[0] == pytest.approx(0.75)
    with pytest.raises(ConfigError):
        LogisticModel(np.ones(2), 0.0).predict_proba(X)


def test_accuracy_conventions():
    half = LogisticModel(np.zeros(1), 0.0)
    y = np.array([1, 0, 1, 1, 0])
    assert accuracy(half, np.zeros((5, 1)), y) == pytest.approx(0.6)  # p = 0.5 counts as class 1
    m = LogisticModel(np.ones(1), 0.0)
    assert accuracy(m, np.array([[-1.0], [1.0], [2.0], [-2.0]]), np.array([0, 1, 1, 1])) == 0.75


@given(st.integers(0, 10_000))
def test_proba_monotone_in_bias(seed):
    rng = np.random.default_rng(seed)
    X, w = rng.normal(size=(6, 2)), rng.normal(size=2)
    p1 = LogisticModel(w, -0.5).predict_proba(X)
    p2 = LogisticModel(w, 0.5).predict_proba(X)
    assert np.all(p2 >= p1)


@given(st.integers(0, 10_000))
def test_row_order_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    y = (X[:, 0] + rng.normal(size=30) > 0).astype(float)
    perm = rng.permutation(30)
    a, b = fit_mle(X, y), fit_mle(X[perm], y[perm])
    np.testing.assert_allclose(a.predict_proba(X), b.predict_proba(X), atol=1e-8)


@given(st.integers(0, 10_000))
def test_batch_solver_agrees_with_single_fits(seed):
    rng = np.random.default_rng(seed)
    n, m = 40, 6
    W = rng.normal(size=(n, m))
    W[:, 0] = np.sign(W[:, 0]) * (np.abs(W[:, 0]) + 0.1)
    y = (W[:, 0] > 0).astype(float) if seed % 3 == 0 else (rng.random(n) < 0.4).astype(float)
    if y.min() == y.max():
        return
    bias, weight, _ = fit_univariate_batch(W, y)
    acc = univariate_accuracies(W, y)
    for j in range(m):
        ref = fit_mle(W[:, [j]], y)
        assert abs(ref.bias - bias[j]) < 1e-5 * (1 + abs(ref.bias))
        assert abs(ref.weights[0] - weight[j]) < 1e-5 * (1 + abs(ref.weights[0]))
        assert acc[j] == accuracy(ref, W[:, [j]], y)


def test_argmax_rows_ties():
    np.testing.assert_array_equal(argmax_rows([[0.2, 0.7, 0.05, 0.05], [0.5, 0.5, 0.1, 0.1], [0.1, 0.2, 0.2, 0.1]]),
                                  [2, 1, 2])
