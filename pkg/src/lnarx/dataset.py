"""Time-series classification data: ingestion, standardisation, splits, folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataError, LabelError, ParseError, SchemaError

LOAD_STATES = ("loaded", "empty")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Sampled input channels with an integer class label per sample.

    Parameters
    ----------
    channels : ndarray of shape (N, p)
        Input signals ``u_1 .. u_p``, one column per channel.
    labels : ndarray of shape (N,)
        Class index per sample, dense in ``1..C``.
    channel_names : tuple of str
        Column name per channel.
    class_names : tuple of str
        Name of class ``v`` is ``class_names[v - 1]``.
    load_state : ndarray of str, optional
        Per-sample ``"loaded"`` / ``"empty"`` flag.
    """

    channels: np.ndarray
    labels: np.ndarray
    channel_names: tuple[str, ...]
    class_names: tuple[str, ...]
    load_state: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.channels, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DataError(f"channels must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DataError("labels must be 1-D with one entry per sample")
        if X.shape[0] < 1:
            raise DataError("dataset needs at least one sample")
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise ParseError(f"non-finite value in row {bad}", row=bad)
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.asarray(y, dtype=float) == np.round(np.asarray(y, dtype=float))):
                raise LabelError("labels must be integers 1..C")
            y = y.astype(int)
        names = tuple(str(c) for c in self.class_names)
        if y.size and (y.min() < 1 or y.max() > len(names)):
            raise LabelError(f"labels must lie in 1..{len(names)}")
        cnames = tuple(str(c) for c in self.channel_names)
        if len(cnames) != X.shape[1]:
            raise DataError(f"{len(cnames)} channel names for {X.shape[1]} channels")
        object.__setattr__(self, "channels", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "channel_names", cnames)
        object.__setattr__(self, "class_names", names)
        if self.load_state is not None:
            ls = np.asarray(self.load_state, dtype=str)
            if ls.shape != y.shape:
                raise DataError("load_state must have one entry per sample")
            bad = ~np.isin(ls, LOAD_STATES)
            if bad.any():
                raise ParseError(f"bad load state {ls[bad][0]!r}", row=int(np.argmax(bad)))
            object.__setattr__(self, "load_state", _frozen(ls))

    @property
    def sample_count(self) -> int:
        return self.channels.shape[0]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]

    def class_counts(self) -> np.ndarray:
        """Samples per class, index ``v - 1`` for class ``v``."""
        return np.bincount(self.labels - 1, minlength=self.class_count)

    def require_all_classes(self):
        missing = [self.class_names[i] for i, c in enumerate(self.class_counts()) if c == 0]
        if missing:
            raise DataError(f"classes absent from data: {missing}")

    def subset(self, indices) -> "TimeSeriesDataset":
        idx = np.asarray(indices, dtype=int)
        return TimeSeriesDataset(
            self.channels[idx],
            self.labels[idx],
            self.channel_names,
            self.class_names,
            None if self.load_state is None else self.load_state[idx],
        )

    def with_channels(self, channels, channel_names=None) -> "TimeSeriesDataset":
        return TimeSeriesDataset(
            channels,
            self.labels,
            self.channel_names if channel_names is None else channel_names,
            self.class_names,
            self.load_state,
        )

    def label_names(self, labels=None) -> list[str]:
        labels = self.labels if labels is None else labels
        return [self.class_names[int(v) - 1] for v in labels]


# --------------------------------------------------------------------------
# CSV ingestion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """Which CSV columns hold the label, the inputs and the load state.

    ``classes`` fixes the label order (class ``v`` is ``classes[v-1]``).
    Without it, the distinct label strings are sorted (numerically when all
    are integers).
    """

    label: str
    inputs: tuple[str, ...]
    load_state: str | None = None
    classes: tuple[str, ...] | None = None
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.classes is not None:
            object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        if not self.inputs:
            raise SchemaError("schema needs at least one input column")

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        return cls(
            label=d["label"],
            inputs=tuple(d["inputs"]),
            load_state=d.get("load_state"),
            classes=tuple(d["classes"]) if d.get("classes") else None,
            delimiter=d.get("delimiter", ","),
        )


def _sorted_classes(values: set[str]) -> tuple[str, ...]:
    try:
        return tuple(sorted(values, key=int))
    except ValueError:
        return tuple(sorted(values))


def _parse_cells(rec: dict, columns, path, i: int) -> list[float]:
    vals = []
    for col in columns:
        cell = rec[col]
        try:
            v = float(cell)
        except (TypeError, ValueError):
            raise ParseError(f"{path}: row {i}, column {col!r}: not a number: {cell!r}", row=i)
        if not math.isfinite(v):
            raise ParseError(f"{path}: row {i}, column {col!r}: non-finite value {cell!r}", row=i)
        vals.append(v)
    return vals


def read_header(path, delimiter=",") -> list[str]:
    with Path(path).open(newline="") as fh:
        return next(csv.reader(fh, delimiter=delimiter), [])


def load_channels(path, columns, delimiter=",") -> np.ndarray:
    """Numeric ``columns`` of a CSV file as an ``(N, len(columns))`` array."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = [_parse_cells(rec, columns, path, i) for i, rec in enumerate(reader, start=1)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def load_csv(path, schema: CsvSchema) -> TimeSeriesDataset:
    """Read a dataset from a CSV file with a header row.

    Rows are kept in file order.  Row numbers in error messages count data
    rows from 1 (the header is row 0).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=schema.delimiter)
        header = reader.fieldnames or []
        wanted = [schema.label, *schema.inputs]
        if schema.load_state:
            wanted.append(schema.load_state)
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows, raw_labels, loads = [], [], []
        for i, rec in enumerate(reader, start=1):
            rows.append(_parse_cells(rec, schema.inputs, path, i))
            raw_labels.append((rec[schema.label] or "").strip())
            if schema.load_state:
                state = (rec[schema.load_state] or "").strip().lower()
                if state not in LOAD_STATES:
                    raise ParseError(f"{path}: row {i}: bad load state {state!r}", row=i)
                loads.append(state)
    if not rows:
        raise DataError(f"{path}: no data rows")
    classes = schema.classes or _sorted_classes(set(raw_labels))
    index = {name: v for v, name in enumerate(classes, start=1)}
    labels = []
    for i, lab in enumerate(raw_labels, start=1):
        if lab not in index:
            raise LabelError(f"{path}: row {i}: unknown label {lab!r}")
        labels.append(index[lab])
    return TimeSeriesDataset(
        np.array(rows, dtype=float),
        np.array(labels, dtype=int),
        schema.inputs,
        classes,
        np.array(loads) if schema.load_state else None,
    )


def write_csv(ds: TimeSeriesDataset, path, label_column="label", load_column="load_state",
              extra: dict[str, Sequence] | None = None, delimiter=","):
    """Write ``ds`` in the format ``load_csv`` reads, labels as class names."""
    extra = extra or {}
    header = [*ds.channel_names, label_column]
    if ds.load_state is not None:
        header.append(load_column)
    header.extend(extra)
    names = ds.label_names()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for k in range(ds.sample_count):
            row = [repr(float(v)) for v in ds.channels[k]]
            row.append(names[k])
            if ds.load_state is not None:
                row.append(ds.load_state[k])
            row.extend(_fmt(col[k]) for col in extra.values())
            w.writerow(row)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------------
# Standardisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    """Per-channel affine map to zero mean, unit (population) variance."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "std", _frozen(np.asarray(self.std, dtype=float)))
        if np.any(self.std <= 0):
            raise DataError("standard deviations must be positive")

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        mean = mean + (X - mean).mean(axis=0)  # second pass removes rounding in the first
        std = np.sqrt(np.mean((X - mean) ** 2, axis=0))
        # constant channels are only centred
        const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        std = np.where(const, 1.0, std)
        return cls(mean, std)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise DataError(f"expected {self.mean.shape[0]} channels, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def apply(self, ds: TimeSeriesDataset) -> TimeSeriesDataset:
        return ds.with_channels(self.transform(ds.channels))


def standardize(ds: TimeSeriesDataset) -> tuple[TimeSeriesDataset, Standardizer]:
    scaler = Standardizer.fit(ds.channels)
    return scaler.apply(ds), scaler


# --------------------------------------------------------------------------
# Splits and folds
# --------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _train_quotas(counts: np.ndarray, n_train: int, fraction: float) -> np.ndarray:
    ideal = fraction * counts
    quota = np.clip(np.floor(ideal).astype(int), 1, counts - 1)
    # largest remainder, earliest class first on ties
    order = np.lexsort((np.arange(len(counts)), -(ideal - quota)))
    deficit = n_train - quota.sum()
    while deficit != 0:
        moved = False
        seq = order if deficit > 0 else order[::-1]
        for c in seq:
            if deficit > 0 and quota[c] < counts[c] - 1:
                quota[c] += 1
                deficit -= 1
                moved = True
            elif deficit < 0 and quota[c] > 1:
                quota[c] -= 1
                deficit += 1
                moved = True
            if deficit == 0:
                break
        if not moved:
            break
    return quota


def stratified_split_indices(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, validation) index arrays, stratified by label."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if np.any(counts < 2):
        raise DataError(f"classes with fewer than 2 samples: {classes[counts < 2].tolist()}")
    n = len(labels)
    if train_fraction * n < len(classes):
        raise DataError("train_fraction * N is smaller than the number of classes")
    quotas = _train_quotas(counts, _round_half_up(train_fraction * n), train_fraction)
    rng = np.random.default_rng(seed)
    train = []
    for c in range(len(classes)):
        members = np.flatnonzero(inverse == c)
        train.append(rng.permutation(members)[: quotas[c]])
    train = np.sort(np.concatenate(train))
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def train_validation_split(ds: TimeSeriesDataset, train_fraction: float = 0.8,
                           seed: int = 0) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    train, valid = stratified_split_indices(ds.labels, train_fraction, seed)
    return ds.subset(train), ds.subset(valid)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every sample index to one of ``k`` folds."""

    k: int
    assignments: np.ndarray
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        if self.k < 2:
            raise ConfigError("need at least 2 folds")
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise ConfigError("fold ids must lie in 0..k-1")
        object.__setattr__(self, "assignments", _frozen(a))

    @property
    def n_samples(self) -> int:
        return len(self.assignments)

    @property
    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def splits(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(train_idx, test_idx)`` for each fold in order."""
        for f in range(self.k):
            test = self.assignments == f
            yield np.flatnonzero(~test), np.flatnonzero(test)


def stratified_folds(labels, k: int, seed: int = 0) -> FoldPlan:
    """Deal class-wise shuffled indices round-robin onto ``k`` folds.

    Fold sizes differ by at most one and each class is spread over the
    folds as evenly as its count allows.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ConfigError("k must be at least 2")
    if k > n:
        raise ConfigError(f"k={k} exceeds the sample count {n}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    assignments = np.empty(n, dtype=int)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)


def make_folds(ds: TimeSeriesDataset, k: int = 5, seed: int = 0) -> FoldPlan:
    return stratified_folds(ds.labels, k, seed)
