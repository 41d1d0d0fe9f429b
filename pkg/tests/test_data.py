import math

import numpy as np
import pytest

from twolayer.data import (
    Dataset,
    load_csv,
    metrics,
    sample_unit_cube,
    standardize,
    synth_function,
    train_test_split,
    write_csv,
)


def test_synth_examples():
    assert synth_function("f5", 0.1 * np.ones(5)) == 1.0
    assert synth_function("f6", 0.5 * np.ones(6)) == 1.0
    assert synth_function("f7", 0.5 * np.ones(7)) == pytest.approx(1 + math.exp(-0.72), rel=1e-15)
    assert synth_function("f7", 0.5 * np.ones(7)) == pytest.approx(1.4867522, abs=1e-7)
    with pytest.raises(ValueError):
        synth_function("f5", np.ones(4))
    with pytest.raises(ValueError):
        synth_function("f9", np.ones(9))


def test_synth_vectorized_matches_pointwise():
    X = sample_unit_cube(6, 20, 0)
    vec = synth_function("f6", X)
    assert vec.shape == (20,)
    np.testing.assert_array_equal(vec, [synth_function("f6", x) for x in X])


@pytest.mark.parametrize("which,d,upper", [("f5", 5, 1.0), ("f6", 6, 2.0), ("f7", 7, 2.0)])
def test_synth_bounds(which, d, upper):
    y = synth_function(which, sample_unit_cube(d, 5000, 1))
    assert np.all((y > 0) & (y <= upper))


def test_f5_invariant_orthogonal_to_ones():
    rng = np.random.default_rng(2)
    ones = np.ones(5) / np.sqrt(5)
    for _ in range(100):
        x = rng.random(5)
        v = rng.standard_normal(5)
        v -= (v @ ones) * ones
        assert abs(synth_function("f5", x + v) - synth_function("f5", x)) <= 1e-12


def test_sample_unit_cube():
    X = sample_unit_cube(3, 100_000, 7)
    assert X.shape == (100_000, 3) and X.min() >= 0 and X.max() <= 1
    np.testing.assert_array_equal(X, sample_unit_cube(3, 100_000, 7))
    assert np.all(np.abs(X.mean(axis=0) - 0.5) <= 4 / np.sqrt(12 * 100_000))
    with pytest.raises(ValueError):
        sample_unit_cube(0, 5, 0)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    X, y = rng.standard_normal((10, 3)) * 10.0 ** rng.integers(-20, 20, (10, 3)), rng.standard_normal(10)
    path = tmp_path / "d.csv"
    write_csv(path, X, y)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,y"
    ds = load_csv(path)
    np.testing.assert_allclose(ds.X, X, rtol=1e-15)
    np.testing.assert_allclose(ds.y, y, rtol=1e-15)
    assert ds.name == "d" and ds.columns == ("x1", "x2", "x3", "y")


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_csv(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,y\n1,2,3\n4,oops,6\n")
    with pytest.raises(ValueError, match="row 3, column 2"):
        load_csv(bad)
    header_only = tmp_path / "h.csv"
    header_only.write_text("a,y\n")
    with pytest.raises(ValueError):
        load_csv(header_only)


def test_csv_rejects_nonfinite_rows(tmp_path, caplog):
    path = tmp_path / "nan.csv"
    path.write_text("a,y\n1,2\nnan,3\n4,inf\n5,6\n")
    ds = load_csv(path)
    np.testing.assert_array_equal(ds.X[:, 0], [1, 5])
    assert "rejected 2 rows" in caplog.text


def test_split():
    ds = Dataset.from_arrays(np.arange(20.0).reshape(10, 2), np.arange(10.0))
    sp = train_test_split(ds, 0.8, 0)
    assert sp.train_mask.sum() == 8 and len(sp.y_test) == 2
    assert set(sp.y_train) | set(sp.y_test) == set(range(10))
    assert not set(sp.y_train) & set(sp.y_test)
    np.testing.assert_array_equal(sp.train_mask, train_test_split(ds, 0.8, 0).train_mask)
    with pytest.raises(ValueError):
        train_test_split(ds, 0.0, 0)


def test_standardize():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 3)) * [1, 10, 0] + [0, 5, 2]
    ds = train_test_split(Dataset.from_arrays(X, 3 * rng.standard_normal(50) + 1), 0.7, 1)
    st = standardize(ds)
    assert np.all(np.abs(st.X_train.mean(axis=0)) <= 1e-10)
    np.testing.assert_allclose(st.X_train.std(axis=0)[:2], 1.0, atol=1e-8)
    assert st.standardization.constant_features == (2,)
    assert st.standardization.x_scale[2] == 1.0
    assert abs(st.y_train.mean()) <= 1e-10 and abs(st.y_train.std() - 1) <= 1e-8
    # statistics come from the training rows only
    np.testing.assert_allclose(st.X_test, (ds.X_test - ds.X_train.mean(0)) /
                               np.where(ds.X_train.std(0) == 0, 1, ds.X_train.std(0)))
    twice = standardize(st)
    np.testing.assert_allclose(twice.X, st.X, atol=1e-12)
    np.testing.assert_allclose(twice.y, st.y, atol=1e-12)
    np.testing.assert_allclose(twice.standardization.apply_x(ds.X), twice.X, atol=1e-12)


def test_metrics():
    assert metrics([1.0, 2.0], [1.0, 2.0]) == {"mse": 0.0, "max_abs_error": 0.0}
    assert metrics([0.0, 0.0], [1.0, -1.0]) == {"mse": 1.0, "max_abs_error": 1.0}
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    m = metrics(a, b)
    assert m["mse"] == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 100, rel=1e-13)
    assert m["max_abs_error"] == max(abs(x - y) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        metrics([], [])
