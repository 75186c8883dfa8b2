"""Polynomial NARX candidate terms and their design matrix.

A term is a monomial over lagged signals.  Its canonical string form is::

    term    = factor , { "*" , factor } ;
    factor  = signal , "(k" , [ "-" , lag ] , ")" , [ "^" , power ] ;
    signal  = "y" | "u" , channel ;
    channel = positive integer ;      (* 1-based input channel *)
    lag     = positive integer ;      (* "(k)" means lag 0 *)
    power   = integer >= 2 ;

Factors appear in canonical variable order: the output ``y`` first, then
inputs by channel, then by lag.  ``u3(k-2)^2*u1(k-1)`` parses fine but
renders back as ``u1(k-1)*u3(k-2)^2``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ConfigError, InsufficientDataError

# (kind, channel, lag); kind 0 = output y (channel 0), kind 1 = input u_channel
Variable = tuple[int, int, int]

OUTPUT, INPUT = 0, 1


@dataclass(frozen=True)
class LagSpec:
    """Search-space definition: nonlinearity degree and maximum lags.

    ``n_u`` is either one lag shared by all ``n_inputs`` channels or a
    sequence with one lag per channel.  Input lags start at 1 unless
    ``allow_lag_zero_inputs`` is set, in which case they start at 0.
    """

    degree: int = 2
    n_y: int = 0
    n_u: int | tuple[int, ...] = 0
    n_inputs: int = 1
    allow_lag_zero_inputs: bool = False

    def __post_init__(self):
        if self.degree < 1:
            raise ConfigError("nonlinearity degree must be >= 1")
        if self.n_y < 0:
            raise ConfigError("n_y must be >= 0")
        if self.n_inputs < 0:
            raise ConfigError("n_inputs must be >= 0")
        if not isinstance(self.n_u, int):
            lags = tuple(int(v) for v in self.n_u)
            if len(lags) != self.n_inputs:
                raise ConfigError(f"{len(lags)} input lags for {self.n_inputs} inputs")
            object.__setattr__(self, "n_u", lags)
        if any(v < 0 for v in self.input_lags):
            raise ConfigError("input lags must be >= 0")

    @property
    def input_lags(self) -> tuple[int, ...]:
        if isinstance(self.n_u, int):
            return (self.n_u,) * self.n_inputs
        return self.n_u

    @property
    def max_lag(self) -> int:
        return max((self.n_y, *self.input_lags), default=0)

    def variables(self) -> list[Variable]:
        """Regression-vector variables in canonical order."""
        out: list[Variable] = [(OUTPUT, 0, j) for j in range(1, self.n_y + 1)]
        first = 0 if self.allow_lag_zero_inputs else 1
        for ch, nu in enumerate(self.input_lags, start=1):
            out.extend((INPUT, ch, j) for j in range(first, nu + 1))
        return out

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "n_y": self.n_y,
            "n_u": self.n_u if isinstance(self.n_u, int) else list(self.n_u),
            "n_inputs": self.n_inputs,
            "allow_lag_zero_inputs": self.allow_lag_zero_inputs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LagSpec":
        n_u = d.get("n_u", 0)
        return cls(
            degree=int(d.get("degree", 2)),
            n_y=int(d.get("n_y", 0)),
            n_u=n_u if isinstance(n_u, int) else tuple(n_u),
            n_inputs=int(d.get("n_inputs", 1)),
            allow_lag_zero_inputs=bool(d.get("allow_lag_zero_inputs", False)),
        )


def _render_var(var: Variable) -> str:
    kind, ch, lag = var
    name = "y" if kind == OUTPUT else f"u{ch}"
    return f"{name}(k)" if lag == 0 else f"{name}(k-{lag})"


_FACTOR = re.compile(r"(y|u(\d+))\(k(?:-(\d+))?\)(?:\^(\d+))?")


@dataclass(frozen=True, order=True)
class CandidateTerm:
    """A monomial: ``factors`` holds ``((kind, channel, lag), power)`` pairs
    sorted by variable."""

    factors: tuple[tuple[Variable, int], ...]

    @classmethod
    def from_variables(cls, variables: Sequence[Variable]) -> "CandidateTerm":
        counts = Counter(tuple(v) for v in variables)
        return cls(tuple(sorted(counts.items())))

    @classmethod
    def parse(cls, text: str) -> "CandidateTerm":
        variables: list[Variable] = []
        for part in text.replace(" ", "").split("*"):
            m = _FACTOR.fullmatch(part)
            if m is None:
                raise ConfigError(f"cannot parse term factor {part!r} in {text!r}")
            kind = OUTPUT if m.group(1) == "y" else INPUT
            ch = 0 if kind == OUTPUT else int(m.group(2))
            lag = int(m.group(3) or 0)
            power = int(m.group(4) or 1)
            if kind == INPUT and ch < 1:
                raise ConfigError(f"input channels are 1-based: {part!r}")
            if kind == OUTPUT and lag < 1:
                raise ConfigError(f"output terms need lag >= 1: {part!r}")
            if power < 1:
                raise ConfigError(f"power must be >= 1: {part!r}")
            variables.extend([(kind, ch, lag)] * power)
        return cls.from_variables(variables)

    @property
    def degree(self) -> int:
        return sum(p for _, p in self.factors)

    @property
    def max_lag(self) -> int:
        return max(v[2] for v, _ in self.factors)

    @property
    def input_channels(self) -> tuple[int, ...]:
        """1-based input channels the term touches, ascending."""
        return tuple(sorted({v[1] for v, _ in self.factors if v[0] == INPUT}))

    @property
    def uses_output(self) -> bool:
        return any(v[0] == OUTPUT for v, _ in self.factors)

    def __str__(self) -> str:
        return "*".join(_render_var(v) + (f"^{p}" if p > 1 else "") for v, p in self.factors)

    def evaluate(self, y: np.ndarray | None, U: np.ndarray, start: int) -> np.ndarray:
        """Column of term values for time indices ``start .. N-1`` (0-based)."""
        n = U.shape[0]
        col = np.ones(n - start)
        for (kind, ch, lag), power in self.factors:
            if kind == OUTPUT:
                if y is None:
                    raise ConfigError(f"term {self} needs the output signal")
                sig = y
            else:
                if ch > U.shape[1]:
                    raise ConfigError(f"term {self} uses channel {ch} but data has {U.shape[1]}")
                sig = U[:, ch - 1]
            col = col * sig[start - lag: n - lag] ** power
        return col


def term_count(n_variables: int, degree: int) -> int:
    """Number of non-constant monomials of total degree <= ``degree``."""
    return comb(n_variables + degree, degree) - 1


def enumerate_terms(spec: LagSpec) -> list[CandidateTerm]:
    """All monomials of degree 1..l over the regression vector, degree-major."""
    variables = spec.variables()
    if not variables:
        raise ConfigError("lag specification leaves no regression variables")
    return [
        CandidateTerm.from_variables(combo)
        for d in range(1, spec.degree + 1)
        for combo in combinations_with_replacement(variables, d)
    ]


def regression_vector(ds: TimeSeriesDataset, spec: LagSpec, k: int) -> np.ndarray:
    """Values of ``spec.variables()`` at 0-based time index ``k``."""
    if k < spec.max_lag or k >= ds.sample_count:
        raise ConfigError(f"time index {k} outside usable range")
    y = ds.labels.astype(float)
    out = []
    for kind, ch, lag in spec.variables():
        out.append(y[k - lag] if kind == OUTPUT else ds.channels[k - lag, ch - 1])
    return np.array(out)


@dataclass(frozen=True)
class TermLibrary:
    """Candidate terms evaluated over the usable time indices.

    Row ``r`` of ``design_matrix`` is time index ``effective_start + r`` and
    ``targets[r]`` is the class label at that time.
    """

    terms: tuple[CandidateTerm, ...]
    design_matrix: np.ndarray
    effective_start: int
    targets: np.ndarray

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def n_eff(self) -> int:
        return self.design_matrix.shape[0]

    def columns(self, indices) -> np.ndarray:
        return self.design_matrix[:, list(indices)]

    def index_of(self, term: CandidateTerm) -> int:
        return self.terms.index(term)


def build_design_matrix(ds: TimeSeriesDataset, terms: Sequence[CandidateTerm],
                        max_lag: int | None = None, min_rows: int | None = None) -> TermLibrary:
    """Evaluate ``terms`` on ``ds``.

    Output-lag factors use the numeric class label as the signal ``y``.
    ``max_lag`` fixes the first usable row (defaults to the largest lag
    among ``terms``) so that libraries built from different term subsets
    stay row-aligned.  ``min_rows`` defaults to ``2 * C``.
    """
    terms = tuple(terms)
    if len(set(terms)) != len(terms):
        raise ConfigError("duplicate terms in library")
    start = max((t.max_lag for t in terms), default=0) if max_lag is None else max_lag
    if terms and start < max(t.max_lag for t in terms):
        raise ConfigError("max_lag smaller than a term lag")
    n_eff = ds.sample_count - start
    need = 2 * ds.class_count if min_rows is None else min_rows
    if n_eff < max(need, 1):
        raise InsufficientDataError(f"{n_eff} usable rows after lag {start}; need {need}")
    y = ds.labels.astype(float)
    X = np.empty((n_eff, len(terms)))
    for j, t in enumerate(terms):
        X[:, j] = t.evaluate(y, ds.channels, start)
    return TermLibrary(terms, X, start, ds.labels[start:].copy())
