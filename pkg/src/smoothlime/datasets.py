"""Simulated two-cluster data, CSV ingestion, and train/test splitting."""

import csv
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateFeature, EmptySplit, NonBinaryTarget, ParseError
from .sampling import SplitMixStream

CLUSTER_MEANS = np.array([[-1.0, -1.0], [1.0, 1.0]])
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    norm_stats: tuple = None  # (mean, std) arrays from the train split, or None
    train_idx: np.ndarray = None
    test_idx: np.ndarray = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not set(np.unique(labels).tolist()) <= {0, 1}:
            raise NonBinaryTarget("labels must be 0 or 1")
        if self.train_idx is not None:
            both = np.concatenate([self.train_idx, self.test_idx])
            if len(np.unique(both)) != len(both) or len(both) != len(labels):
                raise ValueError("split indices must be disjoint and cover every row")

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def X_train(self):
        return self.features[self.train_idx]

    @property
    def y_train(self):
        return self.labels[self.train_idx]

    @property
    def X_test(self):
        return self.features[self.test_idx]

    @property
    def y_test(self):
        return self.labels[self.test_idx]


def generate_simulated(n=1000, seed=0):
    """Labels uniform on {0, 1}; features ~ N(mu_y, I_2), mu_0 = [-1,-1], mu_1 = [1,1]."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    stream = SplitMixStream(seed)
    labels = (stream.uniform(n) < 0.5).astype(int)
    X = CLUSTER_MEANS[labels] + stream.normal(2 * n).reshape(n, 2)
    return Dataset(X, labels, ("x1", "x2"))


def load_csv(path, target_column, drop_columns=()):
    """Read a headed, comma-separated UTF-8 file with a 0/1 target column.

    ``drop_columns`` are removed before parsing (use it for categorical
    columns). Every remaining column must parse as a real number.
    """
    drop = set(drop_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", 1) from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ParseError(f"target column {target_column!r} not in header", 1)
        missing = drop - set(header)
        if missing:
            raise ParseError(f"drop columns not in header: {sorted(missing)}", 1)
        keep = [i for i, h in enumerate(header) if h not in drop and h != target_column]
        t = header.index(target_column)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                values = [float(row[i]) for i in keep]
                target = float(row[t])
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            if not all(np.isfinite(values)):
                raise ParseError("non-finite value", line)
            if target not in (0.0, 1.0):
                raise NonBinaryTarget(f"line {line}: target value {row[t]!r} is not 0 or 1")
            rows.append(values)
            labels.append(int(target))
    features = np.array(rows, dtype=np.float64).reshape(len(rows), len(keep))
    return Dataset(features, np.array(labels, dtype=int), tuple(header[i] for i in keep))


class TrainSplitStandardizer(TransformerMixin, BaseEstimator):
    """Per-feature ``(v - mean) / std`` with statistics from the data passed to ``fit``."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        bad = np.flatnonzero(self.scale_ <= STD_FLOOR)
        if bad.size:
            raise DegenerateFeature(f"features {bad.tolist()} are constant on the train split")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return np.asarray(X) * self.scale_ + self.mean_


def split_and_normalize(data, train_fraction=0.8, seed=0, normalize=True):
    """Shuffle deterministically, split, and standardize with train-split statistics."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(data.labels)
    order = np.argsort(SplitMixStream(seed).uniform(n), kind="stable")
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise EmptySplit(f"{n} rows cannot give two rows per split at fraction {train_fraction}")
    train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    features, stats = data.features, None
    if normalize:
        scaler = TrainSplitStandardizer().fit(data.features[train_idx])
        features = scaler.transform(data.features)
        stats = (scaler.mean_, scaler.scale_)
    return replace(data, features=features, norm_stats=stats,
                   train_idx=train_idx, test_idx=test_idx)
