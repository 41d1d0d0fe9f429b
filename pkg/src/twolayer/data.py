"""Synthetic test functions, CSV datasets, splitting, scaling and error metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SYNTH_DIMS = {"f5": 5, "f6": 6, "f7": 7}


def synth_function(which: str, x) -> np.ndarray | float:
    """Evaluate one of the test functions on the unit cube.

    ``x`` is a single point or an ``(N, d)`` array. All sums run over coordinates:

        f5(x) = exp(-4 (sum_{j<=5} x_j - 0.5)^2)
        f6(x) = exp(-4 sum_{j<=5} (x_j - 0.5)^2) + 2 |x_1 - 0.5|
        f7(x) = exp(-sum_{j<=7} (x_j - 0.5)^2) + exp(-9 sum_{j<=2} (x_j - 0.3)^2)
    """
    if which not in SYNTH_DIMS:
        raise ValueError(f"unknown test function {which!r}; expected one of {sorted(SYNTH_DIMS)}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    d = SYNTH_DIMS[which]
    if X.shape[1] != d:
        raise ValueError(f"{which} takes {d}-dimensional points, got {X.shape[1]}")
    if which == "f5":
        y = np.exp(-4.0 * (X.sum(axis=1) - 0.5) ** 2)
    elif which == "f6":
        y = np.exp(-4.0 * ((X[:, :5] - 0.5) ** 2).sum(axis=1)) + 2.0 * np.abs(X[:, 0] - 0.5)
    else:
        y = np.exp(-((X - 0.5) ** 2).sum(axis=1)) + np.exp(-9.0 * ((X[:, :2] - 0.3) ** 2).sum(axis=1))
    return float(y[0]) if single else y


def sample_unit_cube(d: int, N: int, seed: int) -> np.ndarray:
    if d < 1 or N < 1:
        raise ValueError("d and N must be positive")
    return np.random.default_rng(seed).random((N, d))


@dataclass(frozen=True)
class Standardization:
    x_shift: np.ndarray
    x_scale: np.ndarray
    y_shift: float
    y_scale: float
    constant_features: tuple[int, ...] = ()

    def apply_x(self, X):
        return (np.asarray(X, dtype=float) - self.x_shift) / self.x_scale

    def apply_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_shift) / self.y_scale

    def to_dict(self) -> dict:
        return {
            "x_shift": self.x_shift.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_shift": self.y_shift,
            "y_scale": self.y_scale,
            "constant_features": list(self.constant_features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(np.asarray(d["x_shift"], float), np.asarray(d["x_scale"], float),
                   float(d["y_shift"]), float(d["y_scale"]), tuple(d.get("constant_features", ())))


@dataclass(frozen=True)
class Dataset:
    """Inputs ``X (N, d)``, targets ``y (N,)`` and a boolean train mask."""

    X: np.ndarray
    y: np.ndarray
    train_mask: np.ndarray
    name: str = "data"
    columns: tuple[str, ...] = ()
    standardization: Standardization | None = None

    @classmethod
    def from_arrays(cls, X, y, name: str = "data", columns=None) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} rows of inputs but {y.shape[0]} targets")
        if columns is None:
            columns = tuple(f"x{j + 1}" for j in range(X.shape[1])) + ("y",)
        return cls(X, y, np.ones(len(y), dtype=bool), name, tuple(columns))

    @property
    def X_train(self):
        return self.X[self.train_mask]

    @property
    def y_train(self):
        return self.y[self.train_mask]

    @property
    def X_test(self):
        return self.X[~self.train_mask]

    @property
    def y_test(self):
        return self.y[~self.train_mask]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def write_csv(path, X, y, columns=None) -> None:
    """Write inputs and target with a header; floats use shortest round-trip repr."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if columns is None:
        columns = [f"x{j + 1}" for j in range(X.shape[1])] + ["y"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row, target in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def load_csv(path, name: str | None = None) -> Dataset:
    """Read a comma-separated file with a header row; the last column is the target.

    Rows containing non-finite values are dropped (and counted in the log);
    cells that do not parse as numbers raise ``ValueError`` naming row and column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ValueError(f"{path}: need at least one input column and a target column")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(raw)} cells, header has {len(header)}")
            values = []
            for col, cell in enumerate(raw):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: cannot parse {cell!r} at row {lineno}, column {col + 1} ({header[col]})"
                    ) from None
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    finite = np.all(np.isfinite(data), axis=1)
    dropped = int((~finite).sum())
    if dropped:
        log.warning("%s: rejected %d rows with non-finite values", path, dropped)
        data = data[finite]
        if data.shape[0] == 0:
            raise ValueError(f"{path}: every row has non-finite values")
    return Dataset.from_arrays(data[:, :-1], data[:, -1], name or path.stem, tuple(h.strip() for h in header))


def train_test_split(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Mark a seeded random ``round(fraction * N)`` rows as training data."""
    if not 0 < fraction <= 1:
        raise ValueError("train fraction must lie in (0, 1]")
    N = len(ds.y)
    n_train = int(round(fraction * N))
    perm = np.random.default_rng(seed).permutation(N)
    mask = np.zeros(N, dtype=bool)
    mask[perm[:n_train]] = True
    return replace(ds, train_mask=mask)


def standardize(ds: Dataset) -> Dataset:
    """Z-score features and target with statistics of the training rows.

    Constant training features keep scale 1 and are listed in
    ``standardization.constant_features``.
    """
    Xt, yt = ds.X_train, ds.y_train
    if len(yt) == 0:
        raise ValueError("cannot standardize without training rows")
    x_shift = Xt.mean(axis=0)
    x_scale = Xt.std(axis=0)
    constant = tuple(int(j) for j in np.flatnonzero(x_scale == 0))
    x_scale = np.where(x_scale == 0, 1.0, x_scale)
    y_shift = float(yt.mean())
    y_scale = float(yt.std()) or 1.0
    if constant:
        log.warning("%s: constant features %s left unscaled", ds.name, list(constant))
    st = Standardization(x_shift, x_scale, y_shift, y_scale, constant)
    X, y = st.apply_x(ds.X), st.apply_y(ds.y)
    prev = ds.standardization
    if prev is not None:
        # express the result relative to the raw data
        st = Standardization(prev.x_shift + prev.x_scale * x_shift, prev.x_scale * x_scale,
                             prev.y_shift + prev.y_scale * y_shift, prev.y_scale * y_scale,
                             tuple(sorted(set(prev.constant_features) | set(constant))))
    return replace(ds, X=X, y=y, standardization=st)


def metrics(y_true, y_pred) -> dict:
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise ValueError("need at least one value")
    err = y_true - y_pred
    return {"mse": float(np.mean(err * err)), "max_abs_error": float(np.max(np.abs(err)))}
