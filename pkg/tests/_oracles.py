"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except for plain data types and
the single-problem logistic solver (which has its own gradient tests).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from lnarx.logistic import fit_mle
from lnarx.terms import CandidateTerm, TermLibrary


def library_from_matrix(X, targets=None) -> TermLibrary:
    X = np.asarray(X, dtype=float)
    terms = tuple(CandidateTerm.parse(f"u{j + 1}(k)") for j in range(X.shape[1]))
    t = np.ones(len(X), dtype=int) if targets is None else np.asarray(targets)
    return TermLibrary(terms, X, 0, t)


def reference_greedy(X, y, k_max, ridge=1e-4, tol=1e-10):
    """From-scratch orthogonal forward selection.

    Every step rebuilds an orthonormal basis of the chosen (normalised)
    columns with a Householder QR and projects every candidate twice.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    norms = np.linalg.norm(X, axis=0)
    Z = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    chosen = []
    dead = {j for j in range(m) if not norms[j] > 0}
    for _ in range(k_max):
        Q = np.linalg.qr(Z[:, chosen])[0] if chosen else np.zeros((n, 0))
        best, best_acc = None, -1.0
        for j in range(m):
            if j in chosen or j in dead:
                continue
            r = Z[:, j] - Q @ (Q.T @ Z[:, j])
            r = r - Q @ (Q.T @ r)
            if r @ r < tol:
                dead.add(j)
                continue
            w = (r / np.linalg.norm(r))[:, None]
            model = fit_mle(w, y, ridge)
            acc = float(np.mean(model.predict(w) == y))
            if acc > best_acc:
                best, best_acc = j, acc
        if best is None:
            break
        chosen.append(best)
    return chosen


def monomials(variables, degree):
    """All monomials of total degree 1..degree by explicit exponent vectors."""
    v = len(variables)
    out = set()
    for exps in itertools.product(range(degree + 1), repeat=v):
        if 1 <= sum(exps) <= degree:
            out.add(tuple(e for e in exps))
    return out


def severity_table(relief, lv, loaded):
    """Criticality by explicit if/else on the published bands (0=Normal .. 3=P0)."""
    if relief >= 85:
        r = 3
    elif relief >= 60:
        r = 2
    elif relief >= 50:
        r = 1
    else:
        r = 0
    if loaded:
        if lv >= 0.8:
            f = 3
        elif lv > 0.6:
            f = 2
        else:
            f = 0
    else:
        if lv >= 1.0:
            f = 3
        elif lv >= 0.8:
            f = 2
        elif lv > 0.6:
            f = 1
        else:
            f = 0
    return max(r, f)


def nadal_via_angles(alpha_deg, mu):
    """tan(alpha - atan(mu)): the angle-difference form of the same limit."""
    return math.tan(math.radians(alpha_deg) - math.atan(mu))
