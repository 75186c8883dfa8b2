"""Binary logistic regression by penalised maximum likelihood (Newton/IRLS).

The model is ``p(x) = sigma(bias + x @ weights)`` with the standard logistic
``sigma(z) = 1 / (1 + exp(-z))``.  Some texts write the NARX probability
model as ``1 / (1 + exp(+sum theta_i phi_i))``; that is the same family with
the sign of every coefficient flipped, so reported weights here carry the
opposite sign to coefficients quoted in that convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError

DEFAULT_RIDGE = 1e-4
SINGULAR_FALLBACK_RIDGE = 1e-8
DECREMENT_TOL = 1e-12


@dataclass(frozen=True)
class LogisticModel:
    """Fitted binary logistic model.

    ``history`` holds the penalised log-likelihood after every accepted
    Newton step (first entry is the starting point).
    """

    weights: np.ndarray
    bias: float
    ridge: float = DEFAULT_RIDGE
    converged: bool = True
    iterations: int = 0
    ridge_fallback: bool = False
    history: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ConfigError("non-finite logistic coefficients")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ConfigError(f"model expects {self.n_features} columns, got {X.shape[1]}")
        return self.bias + X @ self.weights

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        """Hard 0/1 labels; ``p == 0.5`` goes to class 1."""
        return (self.predict_proba(X) >= 0.5).astype(int)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ConfigError(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def log_likelihood_and_gradient(weights, bias, X, y, ridge=0.0):
    """Penalised log-likelihood and its gradient.

    Returns ``(ell, grad)`` where ``ell = sum(y z - log(1 + e^z)) -
    ridge/2 * ||weights||^2`` with ``z = bias + X @ weights``, and ``grad``
    stacks the bias derivative first, then the weight derivatives.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float).reshape(-1)
    z = bias + X @ w
    ell = float(np.sum(y * z - np.logaddexp(0.0, z)) - 0.5 * ridge * w @ w)
    r = y - expit(z)
    grad = np.concatenate(([r.sum()], X.T @ r - ridge * w))
    return ell, grad


def _bias_only(y: np.ndarray, ridge: float, n_features: int) -> LogisticModel:
    # all labels equal: the MLE bias is infinite, use a shrunk frequency
    p = (y.sum() + 0.5) / (len(y) + 1.0)
    return LogisticModel(np.zeros(n_features), float(np.log(p / (1 - p))), ridge,
                         converged=True, iterations=0)


def fit_mle(X, y, ridge: float = DEFAULT_RIDGE, max_iter: int = 100,
            tol: float = 1e-8) -> LogisticModel:
    """Maximise the ridge-penalised log-likelihood by damped Newton steps.

    The bias is not penalised.  Each Newton step is halved until the
    objective does not decrease, so the recorded ``history`` is monotone.
    Iteration stops once the gradient infinity-norm drops below ``tol``, or
    when the Newton decrement predicts a gain below the floating-point
    resolution of the objective (counted as converged).
    With ``ridge == 0`` and a numerically singular Hessian the fit restarts
    with ``ridge = 1e-8`` and sets ``ridge_fallback``.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if len(y) != n:
        raise ConfigError("X and y have different lengths")
    if n < 1:
        raise ConfigError("need at least one sample")
    if not np.all(np.isfinite(X)):
        raise ConfigError("feature matrix has non-finite entries")
    if not np.all((y == 0) | (y == 1)):
        raise ConfigError("labels must be 0/1")
    if ridge < 0:
        raise ConfigError("ridge must be non-negative")
    if y.min() == y.max():
        return _bias_only(y, ridge, d)

    A = np.hstack([np.ones((n, 1)), X])
    penalty = np.full(d + 1, ridge)
    penalty[0] = 0.0
    beta = np.zeros(d + 1)
    ell, grad = log_likelihood_and_gradient(beta[1:], beta[0], X, y, ridge)
    history = [ell]
    converged = bool(np.max(np.abs(grad)) < tol)
    it = 0
    while not converged and it < max_iter:
        it += 1
        p = expit(A @ beta)
        w = p * (1.0 - p)
        H = (A * w[:, None]).T @ A + np.diag(penalty)
        if ridge == 0.0 and np.linalg.cond(H) > 1e12:
            model = fit_mle(X, y, SINGULAR_FALLBACK_RIDGE, max_iter, tol)
            return LogisticModel(model.weights, model.bias, model.ridge, model.converged,
                                 model.iterations, True, model.history)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        if grad @ step < DECREMENT_TOL * max(1.0, abs(ell)):
            # predicted gain is below the rounding level of ell
            converged = True
            break
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            ell_new, grad_new = log_likelihood_and_gradient(cand[1:], cand[0], X, y, ridge)
            if ell_new >= ell:
                break
            t *= 0.5
        else:
            break  # no ascent direction left at machine precision
        beta, ell, grad = cand, ell_new, grad_new
        history.append(ell)
        converged = bool(np.max(np.abs(grad)) < tol)
    return LogisticModel(beta[1:], beta[0], ridge, converged, it, False, tuple(history))


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    return model.predict_proba(X)


def accuracy(model: LogisticModel, X, y) -> float:
    """Fraction of samples where ``(p >= 0.5) == y``."""
    y = np.asarray(y).reshape(-1)
    return float(np.mean(model.predict(X) == y))


def fit_one_vs_all(X, labels, n_classes: int, ridge: float = DEFAULT_RIDGE,
                   max_iter: int = 100, tol: float = 1e-8) -> list[LogisticModel]:
    """One binary model per class ``v`` in ``1..n_classes`` on ``labels == v``."""
    labels = np.asarray(labels)
    return [fit_mle(X, (labels == v).astype(float), ridge, max_iter, tol)
            for v in range(1, n_classes + 1)]


def argmax_rows(P) -> np.ndarray:
    """1-based column of the row maximum; ties go to the lowest column."""
    return np.argmax(np.asarray(P), axis=1) + 1


def fit_univariate_batch(W, y, ridge: float = DEFAULT_RIDGE, max_iter: int = 100,
                         tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fit ``m`` independent one-feature models, one per column of ``W``.

    Same objective, step-halving rule and stopping test as :func:`fit_mle`
    with a single feature, solved for all columns at once.  Returns
    ``(bias, weight, converged)`` arrays of length ``m``.
    """
    W = _as_matrix(W)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, m = W.shape
    if y.min() == y.max():
        model = _bias_only(y, ridge, 1)
        return np.full(m, model.bias), np.zeros(m), np.ones(m, dtype=bool)
    lam = ridge if ridge > 0 else SINGULAR_FALLBACK_RIDGE
    b = np.zeros(m)
    w = np.zeros(m)
    yc = y[:, None]

    def objective(b, w, cols):
        Z = b + W[:, cols] * w
        ell = np.sum(yc * Z - np.logaddexp(0.0, Z), axis=0) - 0.5 * lam * w * w
        R = yc - expit(Z)
        g0 = R.sum(axis=0)
        g1 = np.einsum("ij,ij->j", W[:, cols], R) - lam * w
        return ell, g0, g1

    ell, g0, g1 = objective(b, w, slice(None))
    active = np.flatnonzero(np.maximum(np.abs(g0), np.abs(g1)) >= tol)
    converged = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        if active.size == 0:
            break
        Wa = W[:, active]
        P = expit(b[active] + Wa * w[active])
        S = P * (1.0 - P)
        h00 = S.sum(axis=0)
        h01 = np.einsum("ij,ij->j", Wa, S)
        h11 = np.einsum("ij,ij->j", Wa * Wa, S) + lam
        det = h00 * h11 - h01 * h01
        safe = det > 1e-300
        det = np.where(safe, det, 1.0)
        d0 = np.where(safe, (h11 * g0[active] - h01 * g1[active]) / det, g0[active])
        d1 = np.where(safe, (h00 * g1[active] - h01 * g0[active]) / det, g1[active])
        flat = g0[active] * d0 + g1[active] * d1 < DECREMENT_TOL * np.maximum(1.0, np.abs(ell[active]))
        if flat.any():
            active, d0, d1 = active[~flat], d0[~flat], d1[~flat]
            if active.size == 0:
                break
        t = np.ones(active.size)
        pending = np.arange(active.size)
        stuck = np.zeros(active.size, dtype=bool)
        nb, nw = b[active].copy(), w[active].copy()
        ne, ng0, ng1 = ell[active].copy(), g0[active].copy(), g1[active].copy()
        for _ in range(60):
            cb = b[active[pending]] + t[pending] * d0[pending]
            cw = w[active[pending]] + t[pending] * d1[pending]
            e, q0, q1 = objective(cb, cw, active[pending])
            ok = e >= ell[active[pending]]
            acc = pending[ok]
            nb[acc], nw[acc], ne[acc], ng0[acc], ng1[acc] = cb[ok], cw[ok], e[ok], q0[ok], q1[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            t[pending] *= 0.5
        else:
            stuck[pending] = True
        b[active], w[active], ell[active], g0[active], g1[active] = nb, nw, ne, ng0, ng1
        converged[active[stuck]] = False
        done = (np.maximum(np.abs(g0[active]), np.abs(g1[active])) < tol) | stuck
        active = active[~done]
    converged[active] = False
    return b, w, converged


def univariate_accuracies(W, y, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Training accuracy of a one-feature fit for every column of ``W``."""
    W = _as_matrix(W)
    y = np.asarray(y, dtype=float).reshape(-1)
    b, w, _ = fit_univariate_batch(W, y, ridge)
    pred = expit(b + W * w) >= 0.5
    return np.mean(pred == (y[:, None] == 1), axis=0)
