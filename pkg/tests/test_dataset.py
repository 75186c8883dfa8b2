import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lnarx.dataset import (
    CsvSchema,
    Standardizer,
    TimeSeriesDataset,
    load_channels,
    load_csv,
    make_folds,
    standardize,
    stratified_folds,
    train_validation_split,
    write_csv,
)
from lnarx.errors import ConfigError, DataError, LabelError, ParseError, SchemaError


def _ds(X, y, classes=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    C = classes or tuple(str(v) for v in range(1, int(np.max(y)) + 1))
    return TimeSeriesDataset(X, np.asarray(y), tuple(f"u{i + 1}" for i in range(X.shape[1])), C)


def test_three_row_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("u1,u2,y\n1,2,a\n3,4,b\n5,6,a\n")
    ds = load_csv(p, CsvSchema("y", ("u1", "u2")))
    assert ds.sample_count == 3 and ds.n_channels == 2
    assert ds.class_names == ("a", "b")
    np.testing.assert_array_equal(ds.labels, [1, 2, 1])
    np.testing.assert_array_equal(ds.channels, [[1, 2], [3, 4], [5, 6]])


def test_nan_cell_names_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("u1,y\n1,a\nnan,b\n")
    with pytest.raises(ParseError) as err:
        load_csv(p, CsvSchema("y", ("u1",)))
    assert err.value.row == 2 and "row 2" in str(err.value)


def test_non_numeric_cell(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("u1,y\n1,a\nfoo,b\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(p, CsvSchema("y", ("u1",)))


def test_missing_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("u1,y\n1,a\n")
    with pytest.raises(SchemaError):
        load_csv(p, CsvSchema("y", ("u1", "u9")))


def test_criticality_labels_follow_schema_order(tmp_path):
    p = tmp_path / "d.csv"
    rows = ["u1,crit"] + [f"{i},{c}" for i, c in enumerate(["P0", "Normal", "P2", "P1", "Normal"])]
    p.write_text("\n".join(rows) + "\n")
    ds = load_csv(p, CsvSchema("crit", ("u1",), classes=("Normal", "P2", "P1", "P0")))
    assert ds.class_count == 4
    np.testing.assert_array_equal(ds.labels, [4, 1, 2, 3, 1])


def test_unknown_label(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("u1,crit\n1,Normal\n2,P9\n")
    with pytest.raises(LabelError):
        load_csv(p, CsvSchema("crit", ("u1",), classes=("Normal", "P2")))


def test_write_then_load_roundtrip(tmp_path, rng):
    X = rng.normal(size=(20, 3))
    y = np.arange(20) % 3 + 1
    ds = TimeSeriesDataset(X, y, ("a", "b", "c"), ("x", "y", "z"), np.where(y == 1, "loaded", "empty"))
    write_csv(ds, tmp_path / "o.csv")
    back = load_csv(tmp_path / "o.csv", CsvSchema("label", ("a", "b", "c"), "load_state", ("x", "y", "z")))
    np.testing.assert_array_equal(back.channels, ds.channels)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.load_state, ds.load_state)
    np.testing.assert_array_equal(load_channels(tmp_path / "o.csv", ["b"]), X[:, [1]])


def test_dataset_rejects_bad_labels():
    with pytest.raises(LabelError):
        _ds([1.0, 2.0], [1, 3], classes=("a", "b"))
    with pytest.raises(DataError):
        TimeSeriesDataset(np.zeros((2, 2)), [1, 1], ("a",), ("x",))


def test_split_sizes_80_20():
    y = np.repeat([1, 2, 3, 4], 25)
    train, valid = train_validation_split(_ds(np.arange(100.0), y), 0.8, seed=3)
    assert (train.sample_count, valid.sample_count) == (80, 20)
    np.testing.assert_array_equal(train.class_counts(), [20] * 4)


def test_split_deterministic_and_disjoint():
    y = np.array([1] * 30 + [2] * 13 + [3] * 7)
    ds = _ds(np.arange(50.0), y)
    a1, b1 = train_validation_split(ds, 0.8, 11)
    a2, b2 = train_validation_split(ds, 0.8, 11)
    np.testing.assert_array_equal(a1.channels, a2.channels)
    np.testing.assert_array_equal(b1.channels, b2.channels)
    ids = np.concatenate([a1.channels[:, 0], b1.channels[:, 0]])
    assert sorted(ids) == list(range(50))


def test_split_ten_balanced_keeps_ratio():
    ds = _ds(np.arange(10.0), [1, 2] * 5)
    for seed in range(20):
        train, valid = train_validation_split(ds, 0.8, seed)
        assert train.class_counts().tolist() == [4, 4]
        assert valid.class_counts().tolist() == [1, 1]


def test_split_errors():
    ds = _ds(np.arange(6.0), [1, 1, 1, 1, 1, 2])
    with pytest.raises(DataError):
        train_validation_split(ds, 0.8, 0)
    with pytest.raises(ConfigError):
        train_validation_split(_ds(np.arange(4.0), [1, 2, 1, 2]), 1.0, 0)


@pytest.mark.parametrize("n,k,sizes", [(10, 5, [2] * 5), (10, 10, [1] * 10), (11, 5, [3, 2, 2, 2, 2])])
def test_fold_sizes(n, k, sizes):
    plan = make_folds(_ds(np.arange(float(n)), np.arange(n) % 2 + 1), k, seed=0)
    assert sorted(plan.fold_sizes.tolist(), reverse=True) == sizes


def test_folds_k_too_large():
    with pytest.raises(ConfigError):
        stratified_folds(np.ones(4), 5)


@given(st.lists(st.integers(1, 4), min_size=8, max_size=120), st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_fold_plan_invariants(labels, k, seed):
    labels = np.array(labels)
    if k > len(labels):
        k = len(labels)
    plan = stratified_folds(labels, k, seed)
    tests = [te for _, te in plan.splits()]
    allidx = np.sort(np.concatenate(tests))
    np.testing.assert_array_equal(allidx, np.arange(len(labels)))
    sizes = plan.fold_sizes
    assert sizes.max() - sizes.min() <= 1
    # each class is spread evenly: per-fold count is floor or ceil of n_c / k
    for te in tests:
        for c in np.unique(labels):
            assert abs(np.sum(labels[te] == c) - np.sum(labels == c) / k) < 1
    again = stratified_folds(labels, k, seed)
    np.testing.assert_array_equal(plan.assignments, again.assignments)


def test_standardize_hand_values():
    ds, sc = standardize(_ds([1.0, 2.0, 3.0], [1, 2, 1]))
    np.testing.assert_allclose(ds.channels[:, 0], [-math.sqrt(1.5), 0, math.sqrt(1.5)], atol=1e-12)
    assert sc.std[0] == pytest.approx(math.sqrt(2 / 3))


def test_standardize_constant_channel():
    ds, sc = standardize(_ds([5.0, 5.0, 5.0], [1, 2, 1]))
    np.testing.assert_array_equal(ds.channels[:, 0], [0, 0, 0])
    assert sc.std[0] == 1.0


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=50))
def test_standardize_properties(rows):
    X = np.array(rows)
    ds = _ds(X, np.arange(len(X)) % 2 + 1)
    z, sc = standardize(ds)
    # inverse recovers the input
    np.testing.assert_allclose(sc.inverse_transform(z.channels), X, rtol=1e-12, atol=1e-9 * (1 + np.abs(X).max()))
    # moment checks need the spread to be resolvable relative to the offset
    ok = [j for j in range(2) if np.ptp(X[:, j]) > 1e-4 * max(1.0, np.abs(X[:, j]).max())]
    for j in ok:
        col = z.channels[:, j]
        assert abs(col.mean()) < 1e-10
        assert abs(col.var() - 1) < 1e-8
    z2, _ = standardize(z)
    np.testing.assert_allclose(z2.channels[:, ok], z.channels[:, ok], atol=1e-10)


def test_standardizer_rejects_nonpositive_std():
    with pytest.raises(DataError):
        Standardizer(np.zeros(1), np.zeros(1))
